#include "sysid/recommender.hpp"

#include <fmt/format.h>

#include "sysid/errors.hpp"

namespace sysid {

RecommenderFlags RecommenderFlags::parse(std::string_view list) {
    RecommenderFlags f;
    while (!list.empty()) {
        const auto comma = list.find(',');
        auto item = list.substr(0, comma);
        list = comma == std::string_view::npos ? std::string_view{} : list.substr(comma + 1);
        while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
        while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
        if (item.empty()) continue;
        if (item == "no-video") f.include_video = false;
        else if (item == "no-history") f.include_history = false;
        else if (item == "no-cot") f.chain_of_thought = false;
        else if (item == "fixed-control") f.tune_control = false;
        else throw InvalidArgument(fmt::format("unknown flag '{}'", item));
    }
    return f;
}

std::string RecommenderFlags::to_string() const {
    std::string out;
    auto add = [&](bool off, const char* name) {
        if (!off) return;
        if (!out.empty()) out += ",";
        out += name;
    };
    add(!include_video, "no-video");
    add(!include_history, "no-history");
    add(!chain_of_thought, "no-cot");
    add(!tune_control, "fixed-control");
    return out;
}

std::string_view to_string(Method method) {
    switch (method) {
        case Method::random: return "random";
        case Method::nelder_mead: return "nelder-mead";
        case Method::golden_cd: return "golden-cd";
        case Method::bo: return "bo";
        case Method::cmaes: return "cma-es";
        case Method::vlm: return "vlm";
        case Method::scripted: return "scripted";
    }
    return "?";
}

Method parse_method(std::string_view text) {
    for (auto m : {Method::random, Method::nelder_mead, Method::golden_cd, Method::bo, Method::cmaes, Method::vlm,
                   Method::scripted}) {
        if (text == to_string(m)) return m;
    }
    if (text == "cmaes") return Method::cmaes;
    if (text == "nm") return Method::nelder_mead;
    throw InvalidArgument(fmt::format("unknown method '{}'", text));
}

}  // namespace sysid
