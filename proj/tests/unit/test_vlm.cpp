#include <doctest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "sysid/calibration.hpp"
#include "sysid/errors.hpp"
#include "sysid/io.hpp"
#include "sysid/vlm.hpp"
// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen's headers.
#include "mock_endpoint.hpp"

using namespace sysid;
using nlohmann::json;

namespace {

RecommendationRequest finger_request(RecommenderFlags flags = {}) {
    const auto table = builtin_bounds(Platform::finger);
    RecommendationRequest r;
    r.iteration = 2;
    r.platform = Platform::finger;
    r.bounds = tuned_bounds(Platform::finger, table);
    r.control_bounds = make_control_bounds(Rig::finger, table);
    r.params = r.bounds.nominal();
    r.control = training_profile(r.control_bounds);
    r.error = 42.5;
    r.error_unit = "px";
    r.flags = flags;
    IterationRecord first;
    first.iteration = 1;
    first.params = r.params;
    first.control = r.control;
    first.error = 42.5;
    r.history.push_back(first);
    return r;
}

std::string reply_with(const std::string& name, double value, double confidence = 0.6) {
    return json{{"analysis", "a"},
                {"parameter_recommendations", {{{"name", name}, {"current_value", 1.0}, {"suggested_value", value},
                                                {"reason", "because"}}}},
                {"confidence", confidence}}
        .dump();
}

VlmEndpoint local(const test::MockEndpoint& mock) {
    VlmEndpoint e;
    e.url = mock.url();
    e.backoff_s = 0.01;
    e.timeout_s = 5.0;
    e.retries = 2;
    return e;
}

bool contains(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

const char* kDelimiters[] = {"--- CANDIDATE PROFILE (JSON) ---", "--- METRICS (JSON) ---", "--- PARAMETER BOUNDS ---",
                             "--- PARAMETER HISTORY ---", "--- TASK ---", "--- OUTPUT JSON SCHEMA (strict) ---"};

}  // namespace

TEST_SUITE("vlm") {

TEST_CASE("prompt carries every section in order") {
    const auto p = build_prompt(finger_request());
    const auto text = p.user_text();
    std::size_t last = 0;
    for (const char* d : kDelimiters) {
        const auto at = text.find(d);
        REQUIRE(at != std::string::npos);
        CHECK(at >= last);
        last = at;
    }
    CHECK(contains(text, "\"mean_abs_px\":42.5"));
    CHECK(contains(text, "frictionloss: [0, 150]"));
    CHECK(contains(text, "amp_deg0: [0, 60]"));
    CHECK(contains(text, "1. Describe the key discrepancies"));
    CHECK_FALSE(p.system.empty());
    CHECK(p.media.empty());  // no media attached to this request
}

TEST_CASE("flags remove their prompt parts") {
    auto flags = RecommenderFlags::parse("no-history,no-cot,fixed-control");
    const auto text = build_prompt(finger_request(flags)).user_text();
    CHECK_FALSE(contains(text, "--- PARAMETER HISTORY ---"));
    CHECK_FALSE(contains(text, "Describe the key discrepancies"));
    CHECK(contains(text, "Propose updated values for all parameters."));
    CHECK_FALSE(contains(text, "amp_deg0: [0, 60]"));
    for (const char* d : {kDelimiters[0], kDelimiters[2], kDelimiters[4], kDelimiters[5]}) CHECK(contains(text, d));
}

TEST_CASE("media references follow the video flag and mode") {
    test::TempDir dir("media");
    write_file_atomic(dir.path() / "sim.csv", "abc");
    write_file_atomic(dir.path() / "real.csv", "xyz1");
    auto req = finger_request();
    req.media = MediaRefs{dir.path() / "sim.csv", dir.path() / "real.csv"};

    const auto by_path = build_prompt(req, MediaMode::path);
    REQUIRE(by_path.media.size() == 2);
    CHECK(by_path.media[0]["role"] == "simulation");
    CHECK(by_path.media[0].contains("path"));
    CHECK(contains(by_path.user_text(), "[VIDEO: sim.csv]"));

    const auto inline_data = build_prompt(req, MediaMode::base64);
    CHECK(inline_data.media[1]["data"] == "eHl6MQ==");

    req.flags.include_video = false;
    const auto none = build_prompt(req);
    CHECK(none.media.empty());
    CHECK_FALSE(contains(none.user_text(), "[VIDEO:"));
}

TEST_CASE("base64") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("fo") == "Zm8=");
    CHECK(base64_encode("foo") == "Zm9v");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
}

TEST_CASE("the worked example reply parses to its printed values") {
    const auto r = parse_recommendation(test::kExampleReply, finger_request());
    CHECK(r.params.at("damping") == 70.0);
    CHECK(r.params.at("armature") == 1.5);
    CHECK(r.params.at("frictionloss") == 50.0);
    CHECK(r.params.at("density") == 5.0);
    CHECK(r.confidence == 0.75);
    CHECK(contains(r.analysis, "Real finger oscillates more"));
    CHECK(contains(r.rationale, "damping: Less damping"));
}

TEST_CASE("replies are found inside fences and prose") {
    const std::string fenced = "Here you go:\n```json\n" + reply_with("damping", 80) + "\n```\nThanks";
    CHECK(parse_recommendation(fenced, finger_request()).params.at("damping") == 80.0);
    const std::string prose = "Sure. " + reply_with("density", 7) + " Done.";
    CHECK(parse_recommendation(prose, finger_request()).params.at("density") == 7.0);
}

TEST_CASE("malformed replies are parse failures") {
    const auto req = finger_request();
    CHECK_THROWS_AS(parse_recommendation("no json here", req), ParseFailure);
    CHECK_THROWS_AS(parse_recommendation(R"({"analysis": "x", "confidence": 0.5})", req), ParseFailure);
    CHECK_THROWS_AS(parse_recommendation(R"({"analysis": 3, "parameter_recommendations": [], "confidence": 0.5})", req),
                    ParseFailure);
    CHECK_THROWS_AS(parse_recommendation(
                        R"({"analysis": "x", "parameter_recommendations": [{"name": "damping"}], "confidence": 0.5})", req),
                    ParseFailure);
    CHECK_THROWS_AS(parse_recommendation(
                        R"({"analysis": "x", "parameter_recommendations": [], "confidence": "high"})", req),
                    ParseFailure);
}

TEST_CASE("confidence is clamped and unknown names ignored") {
    const auto req = finger_request();
    CHECK(parse_recommendation(reply_with("damping", 90, 1.7), req).confidence == 1.0);
    CHECK(parse_recommendation(reply_with("damping", 90, -0.2), req).confidence == 0.0);
    const auto r = parse_recommendation(reply_with("stiffness", 3), req);
    CHECK(r.params == req.params);
}

TEST_CASE("control amplitudes follow the fixed-control flag") {
    const auto tuned = parse_recommendation(reply_with("amp_deg1", 40), finger_request());
    CHECK(tuned.control.channels[1].amplitude == 40.0);
    const auto req = finger_request(RecommenderFlags::parse("fixed-control"));
    const auto fixed = parse_recommendation(reply_with("amp_deg1", 40), req);
    CHECK(fixed.control == req.control);
}

TEST_CASE("endpoint configuration") {
    const auto e = endpoint_from_json({{"url", "http://localhost:9/x"}, {"media", "base64"}, {"top_p", nullptr}});
    CHECK(e.media == MediaMode::base64);
    CHECK_FALSE(e.top_p.has_value());
    CHECK(e.temperature == 1.0);
    CHECK_THROWS_AS(endpoint_from_json({{"url", "http://x"}, {"media", "video"}}), ConfigError);
    CHECK_THROWS_AS(VlmRecommender(VlmEndpoint{"https://example.com/v1"}), ConfigError);
    CHECK_THROWS_AS(VlmRecommender(VlmEndpoint{"ftp://example.com"}), ConfigError);

    Prompt p;
    p.system = "s";
    p.user_sections = {"a", "b"};
    const auto body = request_body(p, e);
    CHECK(body["user_sections"].size() == 2);
    CHECK(body["temperature"] == 1.0);
    CHECK_FALSE(body.contains("top_p"));
    CHECK(p.user_text() == "a\n\nb");
}

TEST_CASE("reply text extraction") {
    CHECK(reply_text(R"({"choices": [{"message": {"content": "hi"}}]})") == "hi");
    CHECK(reply_text(R"({"content": "there"})") == "there");
    CHECK(reply_text("plain") == "plain");
}

TEST_CASE("recommender against a local endpoint") {
    test::MockEndpoint mock;
    mock.push_content(test::kExampleReply);
    ::setenv("SYSID_TEST_KEY", "secret", 1);
    auto e = local(mock);
    e.api_key_env = "SYSID_TEST_KEY";
    VlmRecommender vlm(e);
    const auto out = vlm.recommend(finger_request());
    REQUIRE(out.size() == 1);
    CHECK(out[0].params.at("damping") == 70.0);
    CHECK(vlm.requests_sent() == 1);
    const auto sent = mock.requests();
    REQUIRE(sent.size() == 1);
    CHECK(sent[0].contains("system"));
    CHECK(sent[0]["user_sections"].is_array());
    CHECK(sent[0]["media"].is_array());
    CHECK(mock.auth_headers()[0] == "Bearer secret");
}

TEST_CASE("one re-prompt after a malformed reply") {
    test::MockEndpoint mock;
    mock.push_content("{not json");
    mock.push_content(reply_with("damping", 120));
    VlmRecommender vlm(local(mock));
    const auto out = vlm.recommend(finger_request());
    CHECK(out[0].params.at("damping") == 120.0);
    const auto sent = mock.requests();
    REQUIRE(sent.size() == 2);
    CHECK(contains(sent[1]["user_sections"].back().get<std::string>(), "--- PREVIOUS REPLY REJECTED ---"));

    test::MockEndpoint broken;
    broken.push_content("still not json");
    VlmRecommender bad(local(broken));
    CHECK_THROWS_AS(bad.recommend(finger_request()), ParseFailure);
    CHECK(bad.requests_sent() == 2);
}

TEST_CASE("server errors are retried, then reported unavailable") {
    test::MockEndpoint mock;
    mock.push({503, ""});
    mock.push_content(reply_with("damping", 33));
    VlmRecommender vlm(local(mock));
    CHECK(vlm.recommend(finger_request())[0].params.at("damping") == 33.0);
    CHECK(vlm.requests_sent() == 2);

    test::MockEndpoint down;
    down.push({500, ""});
    VlmRecommender dead(local(down));
    CHECK_THROWS_AS(dead.recommend(finger_request()), RecommenderUnavailable);
    CHECK(dead.requests_sent() == 3);

    test::MockEndpoint refused;
    refused.push({401, ""});
    VlmRecommender no_auth(local(refused));
    CHECK_THROWS_AS(no_auth.recommend(finger_request()), RecommenderUnavailable);
    CHECK(no_auth.requests_sent() == 1);
}

TEST_CASE("scripted recommender") {
    ScriptedRecommender s(json::array({reply_with("damping", 20), reply_with("damping", 30),
                                       json::parse(reply_with("damping", 40))}));
    const auto req = finger_request();
    CHECK(s.recommend(req)[0].params.at("damping") == 20.0);
    CHECK(s.recommend(req)[0].params.at("damping") == 30.0);
    CHECK(s.recommend(req)[0].params.at("damping") == 40.0);
    CHECK(s.recommend(req)[0].params.at("damping") == 40.0);  // exhausted: last entry repeats
    CHECK_THROWS_AS(ScriptedRecommender(json::array()), InvalidArgument);

    test::TempDir dir("script");
    write_file_atomic(dir.path() / "s.json", json::array({json::parse(test::kExampleReply)}).dump());
    CHECK(ScriptedRecommender::from_file(dir.path() / "s.json")->recommend(req)[0].confidence == 0.75);
}

TEST_CASE("the loop clamps scripted and endpoint proposals alike") {
    const auto req = finger_request();
    CalibrationConfig cfg;
    cfg.bounds = req.bounds;
    cfg.control_bounds = req.control_bounds;
    cfg.initial_params = req.params;
    cfg.initial_control = req.control;
    cfg.budget = 2;
    FunctionEvaluator ev([](const ParameterVector&, const ControlProfile&) { return 1.0; });

    ScriptedRecommender scripted(json::array({reply_with("frictionloss", 300)}));
    CHECK(run_calibration(cfg, scripted, ev).history[1].params.at("frictionloss") == 150.0);

    test::MockEndpoint mock;
    mock.push_content(reply_with("frictionloss", 300));
    VlmRecommender vlm(local(mock));
    CHECK(run_calibration(cfg, vlm, ev).history[1].params.at("frictionloss") == 150.0);
}

}
