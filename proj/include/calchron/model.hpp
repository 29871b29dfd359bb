#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "calchron/calibration_curve.hpp"
#include "calchron/detail/stats.hpp"
#include "calchron/error.hpp"

namespace calchron {

/// One radiocarbon measurement tied to a calendar-date parameter.
struct Determination {
    std::string label;
    double x = 0.0;      // radiocarbon age, BP
    double sigma = 0.0;  // laboratory error, BP (> 0)
};

/// A depositional context (phase). When bounded it carries early/late
/// boundary parameters alpha > beta (cal BP, alpha is older). An unbounded
/// context contributes only its determinations and optional internal
/// ordering; it cannot take part in cross-context relations.
struct Context {
    std::string id;
    bool internally_ordered = false;
    bool has_boundaries = true;
    std::vector<Determination> determinations;  // oldest first when ordered
};

/// Stratigraphic relation: `older` was deposited before `younger`, encoded as
/// beta_older >= alpha_younger. With `abutting` the two boundaries collapse
/// into one shared parameter instead.
struct Relation {
    std::string older;
    std::string younger;
    bool abutting = false;
};

/// Overall calendar bounds for every parameter, cal BP (t_max is older).
struct CalendarWindow {
    double t_max = 0.0;
    double t_min = 0.0;
    double width() const { return t_max - t_min; }
};

/// upper >= lower, or upper > lower when strict. Slot ids index ParameterState.
struct OrderConstraint {
    int upper = -1;
    int lower = -1;
    bool strict = false;
};

/// Window box for one slot: lo <= value <= hi.
struct BoundConstraint {
    int slot = -1;
    double lo = 0.0;
    double hi = 0.0;
};

/// Complete pairwise expansion of a model's prior ordering information.
class ConstraintSet {
public:
    std::vector<OrderConstraint> order;
    std::vector<BoundConstraint> bounds;

    bool satisfied(std::span<const double> state) const {
        for (const OrderConstraint& c : order) {
            const double u = state[static_cast<std::size_t>(c.upper)];
            const double l = state[static_cast<std::size_t>(c.lower)];
            if (c.strict ? !(u > l) : !(u >= l)) return false;
        }
        for (const BoundConstraint& b : bounds) {
            const double v = state[static_cast<std::size_t>(b.slot)];
            if (!(v >= b.lo && v <= b.hi)) return false;
        }
        return true;
    }

    /// Indices of order constraints violated by `state` (for audits).
    std::vector<std::size_t> violations(std::span<const double> state) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < order.size(); ++i) {
            const OrderConstraint& c = order[i];
            const double u = state[static_cast<std::size_t>(c.upper)];
            const double l = state[static_cast<std::size_t>(c.lower)];
            if (c.strict ? !(u > l) : !(u >= l)) out.push_back(i);
        }
        return out;
    }
};

/// Likelihood hook: which slot a determination's theta occupies.
struct ThetaBinding {
    int slot = -1;
    double x = 0.0;
    double sigma = 0.0;
    std::size_t context_index = 0;
};

/// One (alpha_j - beta_j)^{-n_j} factor.
struct PhaseTerm {
    int alpha = -1;
    int beta = -1;
    int n = 0;
};

/// Validated chronological model: contexts, relations, the parameter
/// enumeration (every theta, then every alpha/beta pair in context order)
/// and the expanded constraint set. Immutable after construction.
class ChronModel {
public:
    static ChronModel build(CalendarWindow window, std::vector<Context> contexts,
                            std::vector<Relation> relations) {
        ChronModel m;
        m.window_ = window;
        m.contexts_ = std::move(contexts);
        m.relations_ = std::move(relations);
        m.validate_and_index();
        return m;
    }

    /// Parses the JSON model document (see README for the schema) and
    /// validates it. Any malformed input maps to a located Error; arbitrary
    /// bytes never crash.
    static ChronModel parse(std::string_view text);

    const CalendarWindow& window() const { return window_; }
    const std::vector<Context>& contexts() const { return contexts_; }
    const std::vector<Relation>& relations() const { return relations_; }

    std::size_t parameter_count() const { return labels_.size(); }
    const std::vector<std::string>& parameter_labels() const { return labels_; }

    int slot_of(std::string_view label) const {
        auto it = slot_by_name_.find(std::string(label));
        if (it == slot_by_name_.end())
            throw Error(errc::bad_argument, "unknown parameter label '" + std::string(label) + "'");
        return it->second;
    }

    const ConstraintSet& constraint_set() const { return constraints_; }
    const std::vector<ThetaBinding>& theta_bindings() const { return thetas_; }
    const std::vector<PhaseTerm>& phase_terms() const { return phases_; }

    /// Boundary slots for context `i`; -1 when the context is unbounded.
    int alpha_slot(std::size_t i) const { return alpha_slot_[i]; }
    int beta_slot(std::size_t i) const { return beta_slot_[i]; }

    /// A topological linearization of the constraint DAG: uppers before lowers.
    const std::vector<int>& topo_order() const { return topo_; }

    std::size_t determination_count() const { return thetas_.size(); }

private:
    ChronModel() = default;
    void validate_and_index();

    CalendarWindow window_;
    std::vector<Context> contexts_;
    std::vector<Relation> relations_;

    std::vector<std::string> labels_;
    std::unordered_map<std::string, int> slot_by_name_;
    std::vector<ThetaBinding> thetas_;
    std::vector<PhaseTerm> phases_;
    std::vector<int> alpha_slot_;
    std::vector<int> beta_slot_;
    ConstraintSet constraints_;
    std::vector<int> topo_;
};

/// Joint assignment of all parameters, indexed by the model's slot order.
using ParameterState = std::vector<double>;

namespace detail {

// Union-find over raw boundary ids, used to collapse abutting boundaries.
class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    std::size_t find(std::size_t v) {
        while (parent_[v] != v) {
            parent_[v] = parent_[parent_[v]];
            v = parent_[v];
        }
        return v;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

inline void ChronModel::validate_and_index() {
    if (!std::isfinite(window_.t_max) || !std::isfinite(window_.t_min))
        throw Error(errc::bad_argument, "calendar_window values must be finite");
    if (!(window_.t_max > window_.t_min))
        throw Error(errc::bad_argument, "calendar_window: t_max (older) must exceed t_min");
    if (contexts_.empty()) throw Error(errc::empty_model, "model declares no contexts");

    std::unordered_map<std::string, std::size_t> context_index;
    for (std::size_t i = 0; i < contexts_.size(); ++i) {
        const Context& ctx = contexts_[i];
        if (ctx.id.empty()) throw Error(errc::syntax_error, "context with empty id");
        if (!context_index.emplace(ctx.id, i).second)
            throw Error(errc::duplicate_label, "duplicate context id '" + ctx.id + "'");
    }

    for (const Relation& r : relations_) {
        auto older = context_index.find(r.older);
        auto younger = context_index.find(r.younger);
        if (older == context_index.end())
            throw Error(errc::unknown_context, "relation references unknown context '" + r.older + "'");
        if (younger == context_index.end())
            throw Error(errc::unknown_context, "relation references unknown context '" + r.younger + "'");
        if (r.older == r.younger)
            throw Error(errc::cyclic_constraints, "context '" + r.older + "' related to itself");
        if (!contexts_[older->second].has_boundaries || !contexts_[younger->second].has_boundaries)
            throw Error(errc::bad_argument,
                        "relation '" + r.older + "' -> '" + r.younger +
                            "' involves a context without boundary parameters");
    }

    // Theta slots first, in context/listing order.
    labels_.clear();
    slot_by_name_.clear();
    thetas_.clear();
    auto add_label = [this](const std::string& name) -> int {
        const int slot = static_cast<int>(labels_.size());
        if (!slot_by_name_.emplace(name, slot).second)
            throw Error(errc::duplicate_label, "duplicate parameter label '" + name + "'");
        labels_.push_back(name);
        return slot;
    };
    for (std::size_t i = 0; i < contexts_.size(); ++i) {
        for (const Determination& d : contexts_[i].determinations) {
            if (d.label.empty()) throw Error(errc::syntax_error, "determination with empty label");
            if (!(d.sigma > 0.0) || !std::isfinite(d.sigma))
                throw Error(errc::negative_sigma,
                            "determination '" + d.label + "': sigma must be > 0");
            if (!std::isfinite(d.x))
                throw Error(errc::syntax_error, "determination '" + d.label + "': x must be finite");
            const int slot = add_label(d.label);
            thetas_.push_back({slot, d.x, d.sigma, i});
        }
    }

    // Boundary slots: alpha/beta per bounded context, with abutting relations
    // collapsing beta_older and alpha_younger into one shared slot.
    const std::size_t n_ctx = contexts_.size();
    detail::DisjointSet dsu(2 * n_ctx);  // raw id: 2i = alpha_i, 2i+1 = beta_i
    for (const Relation& r : relations_) {
        if (!r.abutting) continue;
        const std::size_t oi = context_index[r.older];
        const std::size_t yi = context_index[r.younger];
        dsu.unite(2 * oi + 1, 2 * yi);
    }
    auto raw_name = [this](std::size_t raw) {
        return (raw % 2 == 0 ? "alpha_" : "beta_") + contexts_[raw / 2].id;
    };
    std::unordered_map<std::size_t, int> slot_of_root;
    std::unordered_map<std::size_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n_ctx; ++i) {
        if (!contexts_[i].has_boundaries) continue;
        members[dsu.find(2 * i)].push_back(2 * i);
        members[dsu.find(2 * i + 1)].push_back(2 * i + 1);
    }
    alpha_slot_.assign(n_ctx, -1);
    beta_slot_.assign(n_ctx, -1);
    for (std::size_t i = 0; i < n_ctx; ++i) {
        if (!contexts_[i].has_boundaries) continue;
        for (const std::size_t raw : {2 * i, 2 * i + 1}) {
            const std::size_t root = dsu.find(raw);
            auto it = slot_of_root.find(root);
            int slot;
            if (it != slot_of_root.end()) {
                slot = it->second;
            } else {
                std::string name;
                for (std::size_t m : members[root]) {
                    if (!name.empty()) name += '=';
                    name += raw_name(m);
                }
                slot = add_label(name);
                slot_of_root.emplace(root, slot);
            }
            (raw % 2 == 0 ? alpha_slot_[i] : beta_slot_[i]) = slot;
            slot_by_name_.emplace(raw_name(raw), slot);  // alias lookup; no-op if taken
        }
    }

    // Phase terms.
    phases_.clear();
    for (std::size_t i = 0; i < n_ctx; ++i) {
        if (!contexts_[i].has_boundaries) continue;
        phases_.push_back({alpha_slot_[i], beta_slot_[i],
                           static_cast<int>(contexts_[i].determinations.size())});
    }

    // Constraint expansion.
    constraints_ = ConstraintSet{};
    auto add_order = [this](int upper, int lower, bool strict) {
        if (upper == lower)
            throw Error(errc::cyclic_constraints,
                        "constraint forces parameter '" + labels_[static_cast<std::size_t>(upper)] +
                            "' to exceed itself");
        for (const OrderConstraint& c : constraints_.order)
            if (c.upper == upper && c.lower == lower && c.strict == strict) return;
        constraints_.order.push_back({upper, lower, strict});
    };
    for (std::size_t i = 0; i < n_ctx; ++i) {
        const Context& ctx = contexts_[i];
        if (ctx.has_boundaries) add_order(alpha_slot_[i], beta_slot_[i], true);
        if (ctx.internally_ordered) {
            for (std::size_t d = 1; d < ctx.determinations.size(); ++d)
                add_order(slot_of(ctx.determinations[d - 1].label),
                          slot_of(ctx.determinations[d].label), true);
        }
        if (ctx.has_boundaries) {
            for (const Determination& d : ctx.determinations) {
                const int t = slot_of(d.label);
                add_order(alpha_slot_[i], t, false);
                add_order(t, beta_slot_[i], false);
            }
        }
    }
    for (const Relation& r : relations_) {
        if (r.abutting) continue;  // collapsed into a shared slot above
        const std::size_t oi = context_index[r.older];
        const std::size_t yi = context_index[r.younger];
        if (beta_slot_[oi] != alpha_slot_[yi])
            add_order(beta_slot_[oi], alpha_slot_[yi], false);
    }
    for (std::size_t s = 0; s < labels_.size(); ++s)
        constraints_.bounds.push_back({static_cast<int>(s), window_.t_min, window_.t_max});

    // Cycle check + topological order (Kahn, smallest slot first for
    // deterministic initialization).
    const std::size_t P = labels_.size();
    std::vector<std::vector<int>> succ(P);
    std::vector<int> indeg(P, 0);
    for (const OrderConstraint& c : constraints_.order) {
        succ[static_cast<std::size_t>(c.upper)].push_back(c.lower);
        ++indeg[static_cast<std::size_t>(c.lower)];
    }
    topo_.clear();
    std::vector<bool> done(P, false);
    for (std::size_t placed = 0; placed < P; ++placed) {
        int pick = -1;
        for (std::size_t s = 0; s < P; ++s) {
            if (!done[s] && indeg[s] == 0) {
                pick = static_cast<int>(s);
                break;
            }
        }
        if (pick < 0)
            throw Error(errc::cyclic_constraints,
                        "ordering constraints contain a cycle (check relations)");
        done[static_cast<std::size_t>(pick)] = true;
        topo_.push_back(pick);
        for (int nxt : succ[static_cast<std::size_t>(pick)]) --indeg[static_cast<std::size_t>(nxt)];
    }
}

inline ChronModel ChronModel::parse(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(errc::syntax_error, e.what());
    }
    if (!doc.is_object()) throw Error(errc::syntax_error, "model document must be a JSON object");

    auto require = [](const nlohmann::json& obj, const char* key, const char* where) -> const nlohmann::json& {
        auto it = obj.find(key);
        if (it == obj.end())
            throw Error(errc::syntax_error, std::string("missing key '") + key + "' in " + where);
        return *it;
    };
    auto check_keys = [](const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool ok = false;
            for (const char* k : allowed)
                if (it.key() == k) ok = true;
            if (!ok)
                throw Error(errc::syntax_error, "unknown key '" + it.key() + "' in " + where);
        }
    };
    auto as_number = [](const nlohmann::json& v, const std::string& where) -> double {
        if (!v.is_number()) throw Error(errc::syntax_error, where + " must be a number");
        return v.get<double>();
    };

    check_keys(doc, {"calendar_window", "contexts", "relations"}, "model document");

    const nlohmann::json& win = require(doc, "calendar_window", "model document");
    if (!win.is_array() || win.size() != 2)
        throw Error(errc::syntax_error, "calendar_window must be [t_max, t_min]");
    CalendarWindow window{as_number(win[0], "calendar_window[0]"),
                          as_number(win[1], "calendar_window[1]")};

    const nlohmann::json& ctxs = require(doc, "contexts", "model document");
    if (!ctxs.is_array()) throw Error(errc::syntax_error, "contexts must be an array");
    std::vector<Context> contexts;
    for (std::size_t i = 0; i < ctxs.size(); ++i) {
        const nlohmann::json& jc = ctxs[i];
        const std::string where = "contexts[" + std::to_string(i) + "]";
        if (!jc.is_object()) throw Error(errc::syntax_error, where + " must be an object");
        check_keys(jc, {"id", "internally_ordered", "boundaries", "determinations"}, where);
        Context ctx;
        const nlohmann::json& id = require(jc, "id", where.c_str());
        if (!id.is_string()) throw Error(errc::syntax_error, where + ".id must be a string");
        ctx.id = id.get<std::string>();
        if (auto it = jc.find("internally_ordered"); it != jc.end()) {
            if (!it->is_boolean())
                throw Error(errc::syntax_error, where + ".internally_ordered must be a boolean");
            ctx.internally_ordered = it->get<bool>();
        }
        if (auto it = jc.find("boundaries"); it != jc.end()) {
            if (!it->is_boolean())
                throw Error(errc::syntax_error, where + ".boundaries must be a boolean");
            ctx.has_boundaries = it->get<bool>();
        }
        if (auto it = jc.find("determinations"); it != jc.end()) {
            if (!it->is_array())
                throw Error(errc::syntax_error, where + ".determinations must be an array");
            for (std::size_t d = 0; d < it->size(); ++d) {
                const nlohmann::json& jd = (*it)[d];
                const std::string dwhere = where + ".determinations[" + std::to_string(d) + "]";
                if (!jd.is_object()) throw Error(errc::syntax_error, dwhere + " must be an object");
                check_keys(jd, {"label", "x", "sigma"}, dwhere);
                const nlohmann::json& lbl = require(jd, "label", dwhere.c_str());
                if (!lbl.is_string())
                    throw Error(errc::syntax_error, dwhere + ".label must be a string");
                Determination det;
                det.label = lbl.get<std::string>();
                det.x = as_number(require(jd, "x", dwhere.c_str()), dwhere + ".x");
                det.sigma = as_number(require(jd, "sigma", dwhere.c_str()), dwhere + ".sigma");
                ctx.determinations.push_back(std::move(det));
            }
        }
        contexts.push_back(std::move(ctx));
    }

    std::vector<Relation> relations;
    if (auto it = doc.find("relations"); it != doc.end()) {
        if (!it->is_array()) throw Error(errc::syntax_error, "relations must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const nlohmann::json& jr = (*it)[i];
            const std::string where = "relations[" + std::to_string(i) + "]";
            if (!jr.is_object()) throw Error(errc::syntax_error, where + " must be an object");
            check_keys(jr, {"older", "younger", "abutting"}, where);
            Relation rel;
            const nlohmann::json& older = require(jr, "older", where.c_str());
            const nlohmann::json& younger = require(jr, "younger", where.c_str());
            if (!older.is_string() || !younger.is_string())
                throw Error(errc::syntax_error, where + ".older/.younger must be strings");
            rel.older = older.get<std::string>();
            rel.younger = younger.get<std::string>();
            if (auto ab = jr.find("abutting"); ab != jr.end()) {
                if (!ab->is_boolean())
                    throw Error(errc::syntax_error, where + ".abutting must be a boolean");
                rel.abutting = ab->get<bool>();
            }
            relations.push_back(std::move(rel));
        }
    }

    return build(window, std::move(contexts), std::move(relations));
}

/// Deterministic constraint-satisfying start state: parameters are laid out
/// strictly decreasing along the topological order, evenly spaced across the
/// sampling window (calendar window intersected with the curve domain when
/// the model has dated parameters) and jittered by the seed. Requires about
/// one calendar year of window width per parameter; narrower windows raise
/// InfeasibleModel.
inline ParameterState feasible_init(const ChronModel& model, const CalibrationCurve& curve,
                                    std::uint64_t seed) {
    double hi = model.window().t_max;
    double lo = model.window().t_min;
    if (!model.theta_bindings().empty()) {
        hi = std::min(hi, curve.max_cal_age());
        lo = std::max(lo, curve.min_cal_age());
    }
    const std::size_t P = model.parameter_count();
    if (!(hi > lo))
        throw Error(errc::infeasible_model,
                    "calendar window does not intersect the calibration curve domain");
    const double spacing = (hi - lo) / static_cast<double>(P + 1);
    if (spacing < 1.0)
        throw Error(errc::infeasible_model,
                    "window [" + std::to_string(lo) + ", " + std::to_string(hi) + "] too narrow for " +
                        std::to_string(P) + " strictly ordered parameters");

    std::mt19937_64 rng(calchron::detail::mix_seed(seed, 0, 17));
    std::uniform_real_distribution<double> jitter(-0.45, 0.45);
    ParameterState state(P, 0.0);
    const std::vector<int>& topo = model.topo_order();
    for (std::size_t rank = 0; rank < P; ++rank) {
        const double centre = hi - static_cast<double>(rank + 1) * spacing;
        state[static_cast<std::size_t>(topo[rank])] = centre + jitter(rng) * spacing;
    }
    return state;
}

}  // namespace calchron
