#include "sysid/vlm.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "sysid/errors.hpp"
#include "sysid/io.hpp"

namespace sysid {

using nlohmann::json;

namespace {

std::string number(double v) { return fmt::format("{:.6g}", v); }

// Tuned parameters first, then the control amplitudes when they are tunable.
std::vector<BoundEntry> prompt_entries(const RecommendationRequest& req) {
    auto out = req.bounds.entries();
    if (req.flags.tune_control) {
        for (const auto& e : req.control_bounds.amplitude.entries()) out.push_back(e);
    }
    return out;
}

double value_of(const ParameterVector& params, const ControlProfile& control, const ControlBounds& cb,
                const std::string& name) {
    if (params.contains(name)) return params.at(name);
    const auto amps = control_as_params(control, cb);
    return amps.at(name);
}

std::string history_table(const RecommendationRequest& req) {
    const auto entries = prompt_entries(req);
    std::string out = "Iter";
    for (const auto& e : entries) out += " | " + e.name;
    out += " | error_" + req.error_unit;
    for (const auto& rec : req.history) {
        out += fmt::format("\n{}", rec.iteration);
        for (const auto& e : entries) {
            double v = std::numeric_limits<double>::quiet_NaN();
            if (rec.params.contains(e.name)) {
                v = rec.params.at(e.name);
            } else if (!rec.control.channels.empty()) {
                v = value_of(rec.params, rec.control, req.control_bounds, e.name);
            }
            out += " | " + number(v);
        }
        out += " | " + (std::isfinite(rec.error) ? fmt::format("{:.3f}", rec.error) : std::string("inf"));
    }
    return out;
}

// First JSON object recoverable from a free-form reply.
std::optional<json> extract_object(std::string_view text) {
    auto attempt = [](std::string_view s) -> std::optional<json> {
        auto j = json::parse(s.begin(), s.end(), nullptr, false);
        if (j.is_discarded() || !j.is_object()) return std::nullopt;
        return j;
    };
    if (auto j = attempt(text)) return j;
    const auto fence = text.find("```");
    if (fence != std::string_view::npos) {
        auto body_start = text.find('\n', fence);
        const auto close = body_start == std::string_view::npos ? body_start : text.find("```", body_start);
        if (close != std::string_view::npos) {
            if (auto j = attempt(text.substr(body_start + 1, close - body_start - 1))) return j;
        }
    }
    const auto open = text.find('{');
    const auto last = text.rfind('}');
    if (open != std::string_view::npos && last != std::string_view::npos && last > open) {
        return attempt(text.substr(open, last - open + 1));
    }
    return std::nullopt;
}

struct Url {
    std::string host_port;
    std::string path;
};

Url split_url(const std::string& url) {
    static const std::regex re(R"(^(https?)://([^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) throw ConfigError(fmt::format("endpoint URL '{}' is not http://host[:port]/path", url));
    if (m[1] == "https") throw ConfigError("https endpoints need a TLS-enabled build; use a local http relay");
    return {"http://" + m[2].str(), m[3].matched ? m[3].str() : std::string("/")};
}

}  // namespace

VlmEndpoint endpoint_from_json(const json& j) {
    VlmEndpoint e;
    e.url = j.at("url").get<std::string>();
    e.api_key_env = j.value("api_key_env", e.api_key_env);
    e.model = j.value("model", e.model);
    const auto media = j.value("media", std::string("path"));
    if (media == "path") e.media = MediaMode::path;
    else if (media == "base64") e.media = MediaMode::base64;
    else throw ConfigError(fmt::format("unknown media mode '{}'", media));
    e.timeout_s = j.value("timeout_s", e.timeout_s);
    e.retries = j.value("retries", e.retries);
    e.backoff_s = j.value("backoff_s", e.backoff_s);
    if (j.contains("temperature")) {
        e.temperature = j["temperature"].is_null() ? std::nullopt : std::optional<double>(j["temperature"].get<double>());
    }
    if (j.contains("top_p")) e.top_p = j["top_p"].is_null() ? std::nullopt : std::optional<double>(j["top_p"].get<double>());
    if (e.retries < 0) throw ConfigError("retries must be non-negative");
    return e;
}

std::string Prompt::user_text() const {
    std::string out;
    for (const auto& s : user_sections) {
        if (!out.empty()) out += "\n\n";
        out += s;
    }
    return out;
}

std::string system_instruction(Rig rig) {
    const std::string body = rig == Rig::finger
                                 ? "a simulated tendon-driven robotic finger"
                                 : "a simulated soft elastic rod driven by a motor at its base";
    return "You tune the physical parameters of " + body +
           " so that its motion reproduces a recording of the real device. "
           "Look at how the simulated and recorded motion differ (amplitude, lag, overshoot, how fast "
           "oscillations die out, shape of the body) and use the table of earlier attempts to judge which "
           "changes helped. You may also change the drive amplitude when doing so would make the effect "
           "of an uncertain parameter easier to see. The recording is the reference; never adjust it. "
           "Keep every value inside its bounds and reply with JSON only.";
}

std::string output_schema_text() {
    return R"({
  "analysis": "string",
  "parameter_recommendations": [
    {"name": "string", "current_value": 0.0, "suggested_value": 0.0, "reason": "string"}
  ],
  "confidence": 0.0,
  "additional_notes": "string"
})";
}

Prompt build_prompt(const RecommendationRequest& req, MediaMode media) {
    Prompt p;
    p.system = system_instruction(req.control_bounds.rig);

    if (req.flags.include_video && req.media) {
        std::string lines;
        for (const auto& [role, path] : {std::pair{"simulation", req.media->sim}, std::pair{"real", req.media->real}}) {
            json item{{"role", role}, {"name", path.filename().string()}};
            if (media == MediaMode::path) {
                item["path"] = std::filesystem::absolute(path).string();
            } else {
                item["data"] = base64_encode(read_text_file(path));
            }
            p.media.push_back(item);
            if (!lines.empty()) lines += "\n";
            lines += fmt::format("[VIDEO: {}]", path.filename().string());
        }
        p.user_sections.push_back(lines);
    }

    json profile{{"parameters", json::object()}};
    for (std::size_t i = 0; i < req.params.size(); ++i) profile["parameters"][req.params.name(i)] = req.params[i];
    if (!req.control.channels.empty()) profile["control"] = to_json(req.control);
    p.user_sections.push_back("--- CANDIDATE PROFILE (JSON) ---\n" + profile.dump(2));

    json metrics{{"mean_abs_" + req.error_unit, std::isfinite(req.error) ? json(req.error) : json(nullptr)}};
    p.user_sections.push_back("--- METRICS (JSON) ---\n" + metrics.dump());

    std::string bounds = "--- PARAMETER BOUNDS ---";
    for (const auto& e : prompt_entries(req)) bounds += fmt::format("\n{}: [{}, {}]", e.name, number(e.min), number(e.max));
    p.user_sections.push_back(bounds);

    if (req.flags.include_history) p.user_sections.push_back("--- PARAMETER HISTORY ---\n" + history_table(req));

    std::string task = "--- TASK ---\n";
    if (req.flags.chain_of_thought) {
        task += "1. Describe the key discrepancies between the simulated and real motion.\n"
                "2. Propose updated values for all parameters.";
    } else {
        task += "Propose updated values for all parameters.";
    }
    if (!req.flags.tune_control) task += "\nThe drive amplitudes are fixed; do not propose them.";
    p.user_sections.push_back(task);

    p.user_sections.push_back("--- OUTPUT JSON SCHEMA (strict) ---\n" + output_schema_text());
    return p;
}

json request_body(const Prompt& prompt, const VlmEndpoint& endpoint) {
    json body{{"system", prompt.system}, {"user_sections", prompt.user_sections}, {"media", prompt.media}};
    if (!endpoint.model.empty()) body["model"] = endpoint.model;
    if (endpoint.temperature) body["temperature"] = *endpoint.temperature;
    if (endpoint.top_p) body["top_p"] = *endpoint.top_p;
    return body;
}

RecommendationResponse parse_recommendation(std::string_view text, const RecommendationRequest& req) {
    const auto obj = extract_object(text);
    if (!obj) throw ParseFailure("reply contains no JSON object");
    const json& j = *obj;
    if (!j.contains("analysis") || !j["analysis"].is_string()) throw ParseFailure("'analysis' missing or not a string");
    if (!j.contains("parameter_recommendations") || !j["parameter_recommendations"].is_array()) {
        throw ParseFailure("'parameter_recommendations' missing or not an array");
    }
    if (!j.contains("confidence") || !j["confidence"].is_number()) throw ParseFailure("'confidence' missing or not a number");
    if (j.contains("additional_notes") && !j["additional_notes"].is_string() && !j["additional_notes"].is_null()) {
        throw ParseFailure("'additional_notes' is not a string");
    }

    RecommendationResponse out;
    out.params = req.params;
    out.control = req.control;
    out.analysis = j["analysis"].get<std::string>();
    ParameterVector amps;
    if (!req.control.channels.empty() && req.control_bounds.channel_count() == req.control.channels.size()) {
        amps = control_as_params(req.control, req.control_bounds);
    }
    std::vector<std::string> seen;
    std::string reasons;
    for (const auto& r : j["parameter_recommendations"]) {
        if (!r.is_object() || !r.contains("name") || !r["name"].is_string()) {
            throw ParseFailure("recommendation entry without a string 'name'");
        }
        if (!r.contains("suggested_value") || !r["suggested_value"].is_number()) {
            throw ParseFailure(fmt::format("recommendation for '{}' has no numeric suggested_value",
                                           r["name"].get<std::string>()));
        }
        const auto name = r["name"].get<std::string>();
        const double v = r["suggested_value"].get<double>();
        if (req.bounds.index_of(name)) {
            out.params.set(name, v);
        } else if (amps.contains(name)) {
            if (req.flags.tune_control) amps.set(name, v);
            else spdlog::info("vlm: ignoring '{}' because control is fixed", name);
        } else {
            spdlog::warn("vlm: ignoring recommendation for unknown parameter '{}'", name);
            continue;
        }
        seen.push_back(name);
        if (r.contains("reason") && r["reason"].is_string()) {
            if (!reasons.empty()) reasons += "; ";
            reasons += name + ": " + r["reason"].get<std::string>();
        }
    }
    for (const auto& name : req.bounds.names()) {
        if (std::find(seen.begin(), seen.end(), name) == seen.end()) {
            spdlog::warn("vlm: no value for '{}', keeping {}", name, req.params.contains(name) ? req.params.at(name) : NAN);
        }
    }
    if (req.flags.tune_control && !amps.empty()) out.control = with_amplitudes(req.control, req.control_bounds, amps);

    double c = j["confidence"].get<double>();
    if (!std::isfinite(c)) throw ParseFailure("confidence is not finite");
    if (c < 0.0 || c > 1.0) {
        spdlog::warn("vlm: confidence {} outside [0, 1], clamped", c);
        c = std::clamp(c, 0.0, 1.0);
    }
    out.confidence = c;
    out.rationale = reasons.empty() ? out.analysis : reasons;
    return out;
}

std::string reply_text(std::string_view body) {
    auto j = json::parse(body.begin(), body.end(), nullptr, false);
    if (j.is_discarded()) return std::string(body);
    if (j.is_object()) {
        if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
            const auto& c = j["choices"][0];
            if (c.contains("message") && c["message"].contains("content") && c["message"]["content"].is_string()) {
                return c["message"]["content"].get<std::string>();
            }
        }
        if (j.contains("content") && j["content"].is_string()) return j["content"].get<std::string>();
    }
    return std::string(body);
}

VlmRecommender::VlmRecommender(VlmEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    split_url(endpoint_.url);  // fail early on a bad URL
}

std::string VlmRecommender::post(const json& body) {
    const auto url = split_url(endpoint_.url);
    httplib::Client client(url.host_port);
    const auto secs = static_cast<time_t>(endpoint_.timeout_s);
    const auto usecs = static_cast<time_t>((endpoint_.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv(endpoint_.api_key_env.c_str()); key && *key) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const auto payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
        if (attempt > 0) {
            const double wait = endpoint_.backoff_s * std::pow(2.0, attempt - 1);
            spdlog::warn("vlm: attempt {} failed ({}), retrying in {:.3g} s", attempt, last_error, wait);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        ++requests_;
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) return res->body;
        last_error = fmt::format("HTTP {}", res->status);
        const bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
        if (!retryable) break;
    }
    throw RecommenderUnavailable(fmt::format("endpoint {} unavailable: {}", endpoint_.url, last_error));
}

std::vector<RecommendationResponse> VlmRecommender::recommend(const RecommendationRequest& request) {
    auto prompt = build_prompt(request, endpoint_.media);
    const auto first = reply_text(post(request_body(prompt, endpoint_)));
    try {
        return {parse_recommendation(first, request)};
    } catch (const ParseFailure& e) {
        spdlog::warn("vlm: reply rejected ({}), asking once more", e.what());
        prompt.user_sections.push_back(fmt::format(
            "--- PREVIOUS REPLY REJECTED ---\n{}\nReply with one JSON object that follows this schema exactly:\n{}",
            e.what(), output_schema_text()));
    }
    const auto second = reply_text(post(request_body(prompt, endpoint_)));
    return {parse_recommendation(second, request)};
}

ScriptedRecommender::ScriptedRecommender(json script) {
    if (!script.is_array() || script.empty()) throw InvalidArgument("script must be a non-empty JSON array");
    for (auto& e : script) entries_.push_back(std::move(e));
}

std::unique_ptr<ScriptedRecommender> ScriptedRecommender::from_file(const std::filesystem::path& path) {
    return std::make_unique<ScriptedRecommender>(read_json_file(path));
}

std::vector<RecommendationResponse> ScriptedRecommender::recommend(const RecommendationRequest& request) {
    if (next_ >= entries_.size()) spdlog::warn("scripted: script exhausted, repeating the last entry");
    const auto& entry = entries_[std::min(next_, entries_.size() - 1)];
    ++next_;
    return {parse_recommendation(entry.is_string() ? entry.get<std::string>() : entry.dump(), request)};
}

std::string base64_encode(std::string_view bytes) {
    static constexpr char table[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const auto n = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += table[(n >> 6) & 63];
        out += table[n & 63];
    }
    if (i < bytes.size()) {
        unsigned n = static_cast<unsigned char>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
        out += table[(n >> 18) & 63];
        out += table[(n >> 12) & 63];
        out += i + 1 < bytes.size() ? table[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

}  // namespace sysid
