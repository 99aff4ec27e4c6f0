#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultra/mdp.hpp"

namespace ultra {

struct CriticalAnnotation {
    int timeslot = 0;
    bool critical = false;
    std::optional<Action> corrected_action;
    std::string explanation;

    bool operator==(const CriticalAnnotation& o) const {
        return timeslot == o.timeslot && critical == o.critical &&
               corrected_action == o.corrected_action && explanation == o.explanation;
    }
};

struct RewardJudgment {
    int timeslot = 0;
    double reward = 0.0;
    std::string analysis;
};

struct CaseAnalysis {
    int episode_id = 0;
    std::string text;
};

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string action_to_text(const Action& a) {
    if (a.kind == Action::Kind::Discrete) {
        switch (a.index) {
            case 0: return "stay";
            case 1: return "move left";
            default: return "move right";
        }
    }
    std::string out = "(";
    char buf[32];
    for (std::size_t i = 0; i < a.vec.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.4f", a.vec[i]);
        out += (i == 0 ? "" : ", ") + std::string(buf);
    }
    return out + ")";
}

// Action field of one record: a discrete name, a continuous tuple, or <none>.
inline std::optional<Action> parse_action_field(const std::string& raw, bool& ok) {
    ok = true;
    std::string text = trim(raw);
    std::string low = lower(text);
    if (low == "<none>" || low == "none" || low.empty()) return std::nullopt;
    if (low == "stay") return Action::discrete(0, 3);
    if (low == "move left") return Action::discrete(1, 3);
    if (low == "move right") return Action::discrete(2, 3);
    if (!text.empty() && text.front() == '(' && text.back() == ')') {
        std::vector<double> vals;
        std::string inner = text.substr(1, text.size() - 2);
        std::size_t pos = 0;
        while (pos < inner.size()) {
            std::size_t comma = inner.find(',', pos);
            std::string tok = trim(inner.substr(pos, comma == std::string::npos
                                                         ? std::string::npos
                                                         : comma - pos));
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str()) {
                ok = false;
                return std::nullopt;
            }
            vals.push_back(std::clamp(v, -1.0, 1.0));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (vals.empty()) {
            ok = false;
            return std::nullopt;
        }
        return Action::continuous(std::move(vals));
    }
    ok = false;
    return std::nullopt;
}

} // namespace detail

// Render annotations into the advisor output grammar:
// {timeslot N, <critical or not>, <corrected action or <none>>, <explanation>}, ...
inline std::string render_annotations(const std::vector<CriticalAnnotation>& annotations) {
    std::string out;
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& a = annotations[i];
        if (i > 0) out += ", ";
        out += "{timeslot " + std::to_string(a.timeslot) + ", ";
        out += a.critical ? "critical" : "not critical";
        out += ", ";
        out += a.corrected_action ? detail::action_to_text(*a.corrected_action)
                                  : std::string("<none>");
        out += ", " + a.explanation + "}";
    }
    return out;
}

struct IdentificationParse {
    std::vector<CriticalAnnotation> annotations;
    std::vector<std::string> warnings;
};

// Extract all well-formed {timeslot, critical-flag, action, explanation}
// records. Records with timeslots outside [window_begin, window_end) are
// dropped with a warning. Throws ParseError only when nothing parses.
inline IdentificationParse parse_identification(const std::string& text, int window_begin,
                                                int window_end) {
    IdentificationParse out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string::npos) {
        std::size_t close = text.find('}', pos);
        if (close == std::string::npos) break;
        std::string body = text.substr(pos + 1, close - pos - 1);
        pos = close + 1;

        std::string low = detail::lower(body);
        std::size_t ts_pos = low.find("timeslot");
        if (ts_pos == std::string::npos) continue;
        char* end = nullptr;
        const char* num_start = body.c_str() + ts_pos + 8;
        long ts = std::strtol(num_start, &end, 10);
        if (end == num_start) continue;

        std::size_t after_ts = static_cast<std::size_t>(end - body.c_str());
        std::size_t c1 = body.find(',', after_ts);
        if (c1 == std::string::npos) continue;
        std::size_t c2 = body.find(',', c1 + 1);
        std::string flag = detail::lower(detail::trim(
            body.substr(c1 + 1, (c2 == std::string::npos ? body.size() : c2) - c1 - 1)));
        bool critical;
        if (flag == "critical") critical = true;
        else if (flag == "not critical" || flag == "uncritical" || flag == "non-critical")
            critical = false;
        else continue;

        CriticalAnnotation ann;
        ann.timeslot = static_cast<int>(ts);
        ann.critical = critical;
        if (c2 != std::string::npos) {
            std::string rest = body.substr(c2 + 1);
            // the action field may itself contain commas (continuous tuples)
            std::string trimmed = detail::trim(rest);
            std::size_t action_end;
            if (!trimmed.empty() && trimmed.front() == '(') {
                std::size_t paren = rest.find(')');
                action_end = paren == std::string::npos ? std::string::npos : paren + 1;
            } else {
                action_end = rest.find(',');
            }
            std::string action_text =
                action_end == std::string::npos ? rest : rest.substr(0, action_end);
            bool ok = false;
            auto action = detail::parse_action_field(action_text, ok);
            if (!ok) {
                out.warnings.push_back("timeslot " + std::to_string(ts) +
                                       ": unrecognized action field dropped");
            } else {
                ann.corrected_action = action;
            }
            if (action_end != std::string::npos) {
                std::size_t expl_start = rest.find(',', action_end);
                if (expl_start != std::string::npos)
                    ann.explanation = detail::trim(rest.substr(expl_start + 1));
            }
        }
        if (!ann.critical) ann.corrected_action.reset();
        if (ann.timeslot < window_begin || ann.timeslot >= window_end) {
            out.warnings.push_back("timeslot " + std::to_string(ts) +
                                   " outside expected window, dropped");
            continue;
        }
        out.annotations.push_back(std::move(ann));
    }
    if (out.annotations.empty())
        throw ParseError("parse_identification: no well-formed records found");
    return out;
}

// Extract the first `reward = <num>` occurrence and trailing analysis text;
// out-of-range rewards are clamped to [-1, 1] with a warning.
inline RewardJudgment parse_reward(const std::string& text,
                                   std::vector<std::string>* warnings = nullptr) {
    std::string low = detail::lower(text);
    std::size_t pos = 0;
    while ((pos = low.find("reward", pos)) != std::string::npos) {
        std::size_t p = pos + 6;
        while (p < low.size() && (low[p] == ' ' || low[p] == '\t')) ++p;
        if (p < low.size() && low[p] == '=') {
            ++p;
            char* end = nullptr;
            double v = std::strtod(text.c_str() + p, &end);
            if (end != text.c_str() + p) {
                RewardJudgment rj;
                rj.reward = v;
                if (v < -1.0 || v > 1.0) {
                    rj.reward = std::clamp(v, -1.0, 1.0);
                    if (warnings)
                        warnings->push_back("reward " + std::to_string(v) +
                                            " clamped to [-1, 1]");
                }
                std::size_t ap = low.find("analysis:");
                if (ap != std::string::npos) {
                    std::string analysis = detail::trim(text.substr(ap + 9));
                    if (!analysis.empty() && analysis.back() == '}') analysis.pop_back();
                    rj.analysis = detail::trim(analysis);
                }
                if (rj.analysis.empty()) rj.analysis = "(no analysis provided)";
                return rj;
            }
        }
        pos += 6;
    }
    throw MissingRewardError("parse_reward: no numeric reward found");
}

// --- annotation persistence -------------------------------------------------
// JSONL: {"episode": int, "t": int, "critical": bool, "action": str|array|null,
//         "explanation": str, "source": "llm"|"oracle"}

inline void save_annotations(const std::string& path,
                             const std::vector<std::pair<int, CriticalAnnotation>>& records,
                             const std::string& source) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_annotations: cannot open " + path);
    for (const auto& [episode, ann] : records) {
        Json j;
        j["episode"] = episode;
        j["t"] = ann.timeslot;
        j["critical"] = ann.critical;
        if (!ann.corrected_action) {
            j["action"] = nullptr;
        } else if (ann.corrected_action->kind == Action::Kind::Discrete) {
            j["action"] = detail::action_to_text(*ann.corrected_action);
        } else {
            j["action"] = ann.corrected_action->vec;
        }
        j["explanation"] = ann.explanation;
        j["source"] = source;
        out << j.dump() << "\n";
    }
}

inline std::vector<std::pair<int, CriticalAnnotation>> load_annotations(
    const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_annotations: cannot open " + path);
    std::vector<std::pair<int, CriticalAnnotation>> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line);
        CriticalAnnotation ann;
        ann.timeslot = j.at("t").get<int>();
        ann.critical = j.at("critical").get<bool>();
        if (!j.at("action").is_null()) {
            if (j.at("action").is_string()) {
                bool ok = false;
                ann.corrected_action =
                    detail::parse_action_field(j.at("action").get<std::string>(), ok);
            } else {
                ann.corrected_action = Action::continuous(j.at("action").get<std::vector<double>>());
            }
        }
        ann.explanation = j.at("explanation").get<std::string>();
        records.emplace_back(j.at("episode").get<int>(), std::move(ann));
    }
    return records;
}

} // namespace ultra
