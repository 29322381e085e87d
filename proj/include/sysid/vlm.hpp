#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sysid/recommender.hpp"

namespace sysid {

enum class MediaMode { path, base64 };

struct VlmEndpoint {
    /// http://host[:port]/path. https is not supported by this build.
    std::string url;
    std::string api_key_env = "SYSID_API_KEY";
    std::string model;
    MediaMode media = MediaMode::path;
    double timeout_s = 120.0;
    /// Retries after the first failed attempt.
    int retries = 3;
    /// First backoff; doubles on each retry.
    double backoff_s = 1.0;
    /// Forwarded verbatim when set.
    std::optional<double> temperature = 1.0;
    std::optional<double> top_p = 0.95;
};

VlmEndpoint endpoint_from_json(const nlohmann::json& j);

struct Prompt {
    std::string system;
    std::vector<std::string> user_sections;
    nlohmann::json media = nlohmann::json::array();

    std::string user_text() const;
};

/// System text for the rig; the tentacle variant talks about a rod.
std::string system_instruction(Rig rig);
std::string output_schema_text();

/// Full prompt for one recommendation, honouring the request flags.
Prompt build_prompt(const RecommendationRequest& request, MediaMode media = MediaMode::path);

/// Wire body: {system, user_sections, media} plus optional model and decoding fields.
nlohmann::json request_body(const Prompt& prompt, const VlmEndpoint& endpoint);

/// Parses a model reply into a proposal. Accepts the schema object bare, inside
/// a code fence, or surrounded by prose. Throws ParseFailure when no object in
/// the strict schema can be recovered. Missing parameters keep their current
/// value and an out-of-range confidence is clamped, each with a warning.
RecommendationResponse parse_recommendation(std::string_view text, const RecommendationRequest& request);

/// Text of the model reply inside an endpoint response body: choices[0].message.content,
/// a top-level "content" string, or the body itself.
std::string reply_text(std::string_view body);

class VlmRecommender final : public Recommender {
public:
    explicit VlmRecommender(VlmEndpoint endpoint);
    std::string name() const override { return "vlm"; }
    std::vector<RecommendationResponse> recommend(const RecommendationRequest& request) override;

    /// Number of HTTP requests sent so far, retries included.
    int requests_sent() const noexcept { return requests_; }

private:
    std::string post(const nlohmann::json& body);

    VlmEndpoint endpoint_;
    int requests_ = 0;
};

/// Replays a JSON array of replies in the output schema, one per call.
class ScriptedRecommender final : public Recommender {
public:
    explicit ScriptedRecommender(nlohmann::json script);
    static std::unique_ptr<ScriptedRecommender> from_file(const std::filesystem::path& path);

    std::string name() const override { return "scripted"; }
    std::vector<RecommendationResponse> recommend(const RecommendationRequest& request) override;

private:
    std::vector<nlohmann::json> entries_;
    std::size_t next_ = 0;
};

std::string base64_encode(std::string_view bytes);

}  // namespace sysid
