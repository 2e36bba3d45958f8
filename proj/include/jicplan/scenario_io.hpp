#pragma once

// Scenario documents: JSON text (// and /* */ comments allowed) holding the
// action catalogue, the plan tree and optional improvement inputs.

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "errors.hpp"
#include "plan.hpp"

namespace jicplan {

namespace io_detail {

using nlohmann::json;

inline void require_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> required,
                         std::initializer_list<std::string_view> optional = {}) {
    if (!j.is_object()) throw SchemaError(std::string(where) + ": expected an object");
    for (auto k : required)
        if (!j.contains(std::string(k)))
            throw SchemaError(std::string(where) + ": missing field '" + std::string(k) + "'");
    for (const auto& [key, _] : j.items()) {
        bool known = false;
        for (auto k : required) known = known || key == k;
        for (auto k : optional) known = known || key == k;
        if (!known) throw SchemaError(std::string(where) + ": unknown field '" + key + "'");
    }
}

inline double number(const json& j, const char* key, std::string_view where) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw SchemaError(std::string(where) + "." + key + ": expected a number");
    return v.get<double>();
}

inline std::string text(const json& j, const char* key, std::string_view where) {
    const auto& v = j.at(key);
    if (!v.is_string()) throw SchemaError(std::string(where) + "." + key + ": expected a string");
    return v.get<std::string>();
}

inline const json& array(const json& j, const char* key, std::string_view where) {
    const auto& v = j.at(key);
    if (!v.is_array()) throw SchemaError(std::string(where) + "." + key + ": expected an array");
    return v;
}

inline Action read_action(const json& j, std::size_t index) {
    const std::string where = "actions[" + std::to_string(index) + "]";
    require_keys(j, where, {"id", "duration", "energy", "energy_floor_ah", "window", "reward"});
    Action a;
    a.id = text(j, "id", where);
    const auto& d = j.at("duration");
    require_keys(d, where + ".duration", {"mean_s", "stddev_s"});
    a.duration = {number(d, "mean_s", where), number(d, "stddev_s", where)};
    const auto& e = j.at("energy");
    require_keys(e, where + ".energy", {"mean_ah", "stddev_ah"});
    a.energy = {number(e, "mean_ah", where), number(e, "stddev_ah", where)};
    a.energy_floor = number(j, "energy_floor_ah", where);
    const auto& w = j.at("window");
    require_keys(w, where + ".window", {"earliest_s", "latest_s"});
    a.window = {number(w, "earliest_s", where), number(w, "latest_s", where)};
    a.reward = number(j, "reward", where);
    return a;
}

inline ActionRef read_ref(const json& j, const std::string& where) {
    if (j.is_string()) return {j.get<std::string>(), std::nullopt};
    require_keys(j, where, {"action_id"}, {"reward"});
    ActionRef r{text(j, "action_id", where), std::nullopt};
    if (j.contains("reward")) r.reward = number(j, "reward", where);
    return r;
}

inline PlanNode read_node(const json& j, const std::string& where) {
    require_keys(j, where, {"action_id"}, {"reward", "alternatives"});
    PlanNode n;
    n.step.action_id = text(j, "action_id", where);
    if (j.contains("reward")) n.step.reward = number(j, "reward", where);
    if (j.contains("alternatives")) {
        const auto& alts = array(j, "alternatives", where);
        for (std::size_t k = 0; k < alts.size(); ++k)
            n.alternatives.push_back(read_node(alts[k], where + ".alternatives[" + std::to_string(k) + "]"));
    }
    return n;
}

inline ImproveSpec read_improve(const json& j) {
    require_keys(j, "improve", {"primary", "alternatives"});
    ImproveSpec s;
    const auto& prim = array(j, "primary", "improve");
    for (std::size_t k = 0; k < prim.size(); ++k)
        s.primary.push_back(read_ref(prim[k], "improve.primary[" + std::to_string(k) + "]"));
    const auto& alts = array(j, "alternatives", "improve");
    for (std::size_t k = 0; k < alts.size(); ++k) {
        const std::string where = "improve.alternatives[" + std::to_string(k) + "]";
        require_keys(alts[k], where, {"name", "actions", "insert_after"});
        AlternativeSpec alt;
        alt.name = text(alts[k], "name", where);
        const auto& acts = array(alts[k], "actions", where);
        for (std::size_t m = 0; m < acts.size(); ++m)
            alt.actions.push_back(read_ref(acts[m], where + ".actions[" + std::to_string(m) + "]"));
        for (const auto& p : array(alts[k], "insert_after", where)) {
            if (!p.is_string()) throw SchemaError(where + ".insert_after: expected strings");
            alt.insert_after.push_back(p.get<std::string>());
        }
        s.alternatives.push_back(std::move(alt));
    }
    return s;
}

inline json write_ref(const ActionRef& r) {
    if (!r.reward) return r.action_id;
    return json{{"action_id", r.action_id}, {"reward", *r.reward}};
}

inline json write_node(const PlanNode& n) {
    json j{{"action_id", n.step.action_id}};
    if (n.step.reward) j["reward"] = *n.step.reward;
    if (!n.alternatives.empty()) {
        j["alternatives"] = json::array();
        for (const auto& a : n.alternatives) j["alternatives"].push_back(write_node(a));
    }
    return j;
}

}  // namespace io_detail

/// Reads a scenario document without checking plan invariants.
/// Throws SyntaxError or SchemaError.
inline ContingentPlan read_plan_document(std::string_view document) {
    using io_detail::json;
    json doc;
    try {
        doc = json::parse(document.begin(), document.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.what(), e.byte);
    }
    try {
        io_detail::require_keys(doc, "scenario", {"name", "time_axis", "energy_axis", "actions", "structure"},
                                {"improve"});
        ContingentPlan plan;
        plan.name = io_detail::text(doc, "name", "scenario");
        const auto& ta = doc.at("time_axis");
        io_detail::require_keys(ta, "time_axis", {"start_s", "end_s"});
        plan.time_axis = {io_detail::number(ta, "start_s", "time_axis"), io_detail::number(ta, "end_s", "time_axis")};
        const auto& ea = doc.at("energy_axis");
        io_detail::require_keys(ea, "energy_axis", {"min_ah", "max_ah"});
        plan.energy_axis = {io_detail::number(ea, "min_ah", "energy_axis"),
                            io_detail::number(ea, "max_ah", "energy_axis")};
        const auto& acts = io_detail::array(doc, "actions", "scenario");
        for (std::size_t k = 0; k < acts.size(); ++k) plan.actions.push_back(io_detail::read_action(acts[k], k));
        const auto& st = io_detail::array(doc, "structure", "scenario");
        for (std::size_t k = 0; k < st.size(); ++k)
            plan.start_alternatives.push_back(io_detail::read_node(st[k], "structure[" + std::to_string(k) + "]"));
        if (doc.contains("improve")) plan.improve = io_detail::read_improve(doc.at("improve"));
        return plan;
    } catch (const json::exception& e) {
        throw SchemaError(e.what());
    }
}

/// Parses and validates. Throws SyntaxError, SchemaError or ValidationError.
inline ContingentPlan parse_plan(std::string_view document) {
    ContingentPlan plan = read_plan_document(document);
    if (auto report = validate_plan(plan); !report.empty()) throw ValidationError(std::move(report));
    return plan;
}

inline std::string serialize_plan(const ContingentPlan& plan) {
    using io_detail::json;
    json doc;
    doc["name"] = plan.name;
    doc["time_axis"] = {{"start_s", plan.time_axis.lo}, {"end_s", plan.time_axis.hi}};
    doc["energy_axis"] = {{"min_ah", plan.energy_axis.lo}, {"max_ah", plan.energy_axis.hi}};
    doc["actions"] = json::array();
    for (const auto& a : plan.actions) {
        doc["actions"].push_back({
            {"id", a.id},
            {"duration", {{"mean_s", a.duration.mean}, {"stddev_s", a.duration.stddev}}},
            {"energy", {{"mean_ah", a.energy.mean}, {"stddev_ah", a.energy.stddev}}},
            {"energy_floor_ah", a.energy_floor},
            {"window", {{"earliest_s", a.window.earliest}, {"latest_s", a.window.latest}}},
            {"reward", a.reward},
        });
    }
    doc["structure"] = json::array();
    for (const auto& n : plan.start_alternatives) doc["structure"].push_back(io_detail::write_node(n));
    if (plan.improve) {
        json imp;
        imp["primary"] = json::array();
        for (const auto& r : plan.improve->primary) imp["primary"].push_back(io_detail::write_ref(r));
        imp["alternatives"] = json::array();
        for (const auto& alt : plan.improve->alternatives) {
            json acts = json::array();
            for (const auto& r : alt.actions) acts.push_back(io_detail::write_ref(r));
            imp["alternatives"].push_back({{"name", alt.name}, {"actions", acts}, {"insert_after", alt.insert_after}});
        }
        doc["improve"] = imp;
    }
    return doc.dump(2) + "\n";
}

/// Throws PlanError if the file cannot be read.
inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PlanError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ContingentPlan load_plan(const std::string& path) { return parse_plan(read_text_file(path)); }

}  // namespace jicplan
