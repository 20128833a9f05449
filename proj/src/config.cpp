/*
 Copyright 2026 The empc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#include "empc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace empc {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Non-finite doubles travel as strings since JSON has no literal for them.
json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
    return v;
}

double number_from_json(const json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError(field, "expected a number, got " + j.dump());
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_to_json(v[i]));
    return out;
}

Vector vector_from_json(const json& j, const std::string& field) {
    if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = number_from_json(j[i], field + "[" + std::to_string(i) + "]");
    }
    return v;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
    return out;
}

Matrix matrix_from_json(const json& j, const std::string& field) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(field, "expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::string rf = field + "[" + std::to_string(r) + "]";
        const Vector row = vector_from_json(j[static_cast<std::size_t>(r)], rf);
        if (row.size() != cols) throw ConfigError(rf, "ragged matrix row");
        m.row(r) = row.transpose();
    }
    return m;
}

json box_to_json(const Box& b) { return {{"lower", vector_to_json(b.lower)}, {"upper", vector_to_json(b.upper)}}; }

// Reads one JSON object and remembers which keys were consumed.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_, "expected an object");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    std::string field(const std::string& key) const { return join(path_, key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    double number(const std::string& key, double fallback) {
        used_.insert(key);
        return has(key) ? number_from_json(j_.at(key), field(key)) : fallback;
    }

    std::int64_t integer(const std::string& key, std::int64_t fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer, got " + v.dump());
        return v.get<std::int64_t>();
    }

    std::string text(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string, got " + v.dump());
        return v.get<std::string>();
    }

    std::optional<std::string> optional_text(const std::string& key) {
        if (!has(key)) {
            used_.insert(key);
            return std::nullopt;
        }
        return text(key, {});
    }

    std::optional<Vector> vector(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        return vector_from_json(j_.at(key), field(key));
    }

    std::optional<Matrix> matrix(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        return matrix_from_json(j_.at(key), field(key));
    }

    std::optional<Box> box(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        Section s(j_.at(key), field(key));
        const auto lo = s.vector("lower");
        const auto hi = s.vector("upper");
        s.finish();
        if (!lo || !hi) throw ConfigError(field(key), "needs both 'lower' and 'upper'");
        if (lo->size() != hi->size()) throw ConfigError(field(key), "'lower' and 'upper' differ in length");
        try {
            return Box(*lo, *hi);
        } catch (const InputError& e) {
            throw ConfigError(field(key), e.what());
        }
    }

    std::optional<Section> child(const std::string& key) {
        used_.insert(key);
        if (!has(key)) return std::nullopt;
        return Section(j_.at(key), field(key));
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) throw ConfigError(field(key), "unknown key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

void require(bool ok, const std::string& field, const std::string& what) {
    if (!ok) throw ConfigError(field, what);
}

TauMode parse_tau_mode(const std::string& s, const std::string& field) {
    if (s == "cover") return TauMode::Cover;
    if (s == "fit") return TauMode::Fit;
    throw ConfigError(field, "expected 'cover' or 'fit', got '" + s + "'");
}

const char* tau_mode_name(TauMode m) { return m == TauMode::Cover ? "cover" : "fit"; }

TerminalCostForm parse_form(const std::string& s, const std::string& field) {
    if (s == "transposed_half") return TerminalCostForm::TransposedHalf;
    if (s == "standard") return TerminalCostForm::Standard;
    throw ConfigError(field, "expected 'transposed_half' or 'standard', got '" + s + "'");
}

const char* form_name(TerminalCostForm f) {
    return f == TerminalCostForm::TransposedHalf ? "transposed_half" : "standard";
}

// Semantic checks that need the built model and cost.
void validate(const StudyConfig& c) {
    PlantModel model = [&] {
        try {
            return build_model(c);
        } catch (const ConfigError&) {
            throw;
        } catch (const InputError& e) {
            throw ConfigError("model", e.what());
        }
    }();
    const int n = model.state_dim();
    const int m = model.input_dim();

    const Equilibrium eq = build_equilibrium(c);
    require(eq.x_s.size() == n, "model.equilibrium.x_s", "expected length " + std::to_string(n));
    require(eq.u_s.size() == m, "model.equilibrium.u_s", "expected length " + std::to_string(m));
    try {
        check_equilibrium(model, eq);
    } catch (const Error& e) {
        throw ConfigError("model.equilibrium", e.what());
    }

    require(!c.cost.economic.empty(), "cost.economic", "required");
    require(c.cost.penalty_weight > 0.0 && std::isfinite(c.cost.penalty_weight), "cost.penalty_weight",
            "must be positive and finite");
    require(c.cost.regularization >= 0.0 && std::isfinite(c.cost.regularization), "cost.regularization",
            "must be >= 0");
    if (c.cost.regularization_reference) {
        require(c.cost.regularization_reference->size() == m, "cost.regularization_reference",
                "expected length " + std::to_string(m));
    }
    try {
        (void)StageCost::from_expressions(n, m, c.cost.economic, std::nullopt, c.cost.penalty_weight);
    } catch (const InputError& e) {
        throw ConfigError("cost.economic", e.what());
    }
    if (c.cost.constraint) {
        try {
            (void)StageCost::from_expressions(n, m, "0", c.cost.constraint, c.cost.penalty_weight);
        } catch (const InputError& e) {
            throw ConfigError("cost.constraint", e.what());
        }
    }

    const auto& s = c.synthesis;
    if (s.K) {
        require(s.K->rows() == m && s.K->cols() == n, "synthesis.K",
                "expected " + std::to_string(m) + "x" + std::to_string(n));
    } else {
        require(s.lqr_Q.has_value() && s.lqr_R.has_value(), "synthesis",
                "give either 'K' or both 'lqr_Q' and 'lqr_R'");
    }
    if (s.lqr_Q) require(s.lqr_Q->rows() == n && s.lqr_Q->cols() == n, "synthesis.lqr_Q", "expected n x n");
    if (s.lqr_R) require(s.lqr_R->rows() == m && s.lqr_R->cols() == m, "synthesis.lqr_R", "expected m x m");
    if (s.Q_tilde) {
        require(s.Q_tilde->rows() == n && s.Q_tilde->cols() == n, "synthesis.Q_tilde", "expected n x n");
    }
    require(!s.mu_schedule.empty(), "synthesis.mu_schedule", "must not be empty");
    for (const double mu : s.mu_schedule) require(mu >= 0.0 && std::isfinite(mu), "synthesis.mu_schedule", "entries must be >= 0");
    require(s.grid_density >= 1, "synthesis.grid_density", "must be >= 1");
    require(s.hessian_samples >= 1, "synthesis.hessian_samples", "must be >= 1");
    require(s.delta_samples >= 1, "synthesis.delta_samples", "must be >= 1");

    require(c.horizon >= 1, "ocp.horizon", "must be >= 1");
    require(c.solver.kkt_tol > 0.0, "ocp.kkt_tol", "must be positive");
    require(c.solver.constraint_tol > 0.0, "ocp.constraint_tol", "must be positive");
    require(c.solver.max_iterations >= 1, "ocp.max_iterations", "must be >= 1");
    require(c.solver.outer_rounds >= 1, "ocp.outer_rounds", "must be >= 1");

    if (c.simulation.x0) {
        require(c.simulation.x0->size() == n, "simulation.x0", "expected length " + std::to_string(n));
        require(model.state_box().contains(*c.simulation.x0), "simulation.x0", "outside the state box");
    }
    require(c.simulation.steps >= 1, "simulation.T", "must be >= 1");
    require(c.simulation.n_runs >= 1, "simulation.n_runs", "must be >= 1");
    require(c.simulation.amplitude >= 0.0 && std::isfinite(c.simulation.amplitude), "simulation.amplitude",
            "must be >= 0");
    require(!c.output.study.empty(), "output.study", "must not be empty");
}

}  // namespace

StudyConfig from_json(const json& j) {
    StudyConfig c;
    Section root(j, "");

    if (auto ms = root.child("model")) {
        ModelConfig& m = c.model;
        m.preset = ms->text("preset", "");
        if (ms->has("rhs")) {
            const json& r = ms->raw("rhs");
            require(r.is_array() && !r.empty(), ms->field("rhs"), "expected a non-empty array of strings");
            for (std::size_t i = 0; i < r.size(); ++i) {
                require(r[i].is_string(), ms->field("rhs") + "[" + std::to_string(i) + "]", "expected a string");
                m.rhs.push_back(r[i].get<std::string>());
            }
        }
        m.state_box = ms->box("state_box");
        m.input_box = ms->box("input_box");
        m.disturbance_box = ms->box("disturbance_box");
        m.sample_time = ms->number("sample_time", m.sample_time);
        m.substeps = static_cast<int>(ms->integer("substeps", m.substeps));
        if (auto es = ms->child("equilibrium")) {
            m.x_s = es->vector("x_s");
            m.u_s = es->vector("u_s");
            es->finish();
        }
        ms->finish();
    } else {
        throw ConfigError("model", "required");
    }

    if (auto cs = root.child("cost")) {
        CostConfig& k = c.cost;
        k.economic = cs->text("economic", "");
        k.constraint = cs->optional_text("constraint");
        k.penalty_weight = cs->number("penalty_weight", k.penalty_weight);
        k.regularization = cs->number("regularization", k.regularization);
        k.regularization_reference = cs->vector("regularization_reference");
        cs->finish();
    } else {
        throw ConfigError("cost", "required");
    }

    if (auto ss = root.child("synthesis")) {
        SynthesisConfig& s = c.synthesis;
        s.K = ss->matrix("K");
        s.lqr_Q = ss->matrix("lqr_Q");
        s.lqr_R = ss->matrix("lqr_R");
        s.Q_tilde = ss->matrix("Q_tilde");
        s.tau_mode = parse_tau_mode(ss->text("tau_mode", "cover"), ss->field("tau_mode"));
        if (auto mu = ss->vector("mu_schedule")) s.mu_schedule.assign(mu->data(), mu->data() + mu->size());
        s.grid_density = static_cast<int>(ss->integer("grid_density", s.grid_density));
        s.hessian_samples = static_cast<int>(ss->integer("hessian_samples", s.hessian_samples));
        s.delta_samples = static_cast<int>(ss->integer("delta_samples", s.delta_samples));
        const auto seed = ss->integer("seed", static_cast<std::int64_t>(s.seed));
        require(seed >= 0, ss->field("seed"), "must be >= 0");
        s.seed = static_cast<std::uint64_t>(seed);
        s.form = parse_form(ss->text("ve_form", "transposed_half"), ss->field("ve_form"));
        ss->finish();
    } else {
        throw ConfigError("synthesis", "required");
    }

    if (auto os = root.child("ocp")) {
        c.horizon = static_cast<int>(os->integer("horizon", c.horizon));
        c.solver.kkt_tol = os->number("kkt_tol", c.solver.kkt_tol);
        c.solver.constraint_tol = os->number("constraint_tol", c.solver.constraint_tol);
        c.solver.max_iterations = static_cast<int>(os->integer("max_iterations", c.solver.max_iterations));
        c.solver.outer_rounds = static_cast<int>(os->integer("outer_rounds", c.solver.outer_rounds));
        c.solver.initial_penalty = os->number("initial_penalty", c.solver.initial_penalty);
        c.solver.memory = static_cast<int>(os->integer("memory", c.solver.memory));
        os->finish();
    }

    if (auto ss = root.child("simulation")) {
        SimulationConfig& s = c.simulation;
        s.x0 = ss->vector("x0");
        s.steps = static_cast<int>(ss->integer("T", s.steps));
        s.n_runs = static_cast<int>(ss->integer("n_runs", s.n_runs));
        const auto seed = ss->integer("seed", static_cast<std::int64_t>(s.seed));
        require(seed >= 0, ss->field("seed"), "must be >= 0");
        s.seed = static_cast<std::uint64_t>(seed);
        s.amplitude = ss->number("amplitude", s.amplitude);
        ss->finish();
    }

    if (auto os = root.child("output")) {
        c.output.directory = os->text("directory", c.output.directory);
        c.output.study = os->text("study", c.output.study);
        os->finish();
    }
    root.finish();

    require(c.model.preset.empty() != c.model.rhs.empty(), "model", "give exactly one of 'preset' and 'rhs'");
    validate(c);
    return c;
}

StudyConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return from_json(j);
}

StudyConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(e.field(), std::string(e.what()) + " (in " + path.string() + ")");
    }
}

json to_json(const StudyConfig& c) {
    json model;
    if (!c.model.preset.empty()) model["preset"] = c.model.preset;
    if (!c.model.rhs.empty()) model["rhs"] = c.model.rhs;
    if (c.model.state_box) model["state_box"] = box_to_json(*c.model.state_box);
    if (c.model.input_box) model["input_box"] = box_to_json(*c.model.input_box);
    if (c.model.disturbance_box) model["disturbance_box"] = box_to_json(*c.model.disturbance_box);
    model["sample_time"] = c.model.sample_time;
    model["substeps"] = c.model.substeps;
    if (c.model.x_s || c.model.u_s) {
        json eq = json::object();
        if (c.model.x_s) eq["x_s"] = vector_to_json(*c.model.x_s);
        if (c.model.u_s) eq["u_s"] = vector_to_json(*c.model.u_s);
        model["equilibrium"] = eq;
    }

    json cost;
    cost["economic"] = c.cost.economic;
    if (c.cost.constraint) cost["constraint"] = *c.cost.constraint;
    cost["penalty_weight"] = c.cost.penalty_weight;
    cost["regularization"] = c.cost.regularization;
    if (c.cost.regularization_reference) cost["regularization_reference"] = vector_to_json(*c.cost.regularization_reference);

    json synth;
    const auto& s = c.synthesis;
    if (s.K) synth["K"] = matrix_to_json(*s.K);
    if (s.lqr_Q) synth["lqr_Q"] = matrix_to_json(*s.lqr_Q);
    if (s.lqr_R) synth["lqr_R"] = matrix_to_json(*s.lqr_R);
    if (s.Q_tilde) synth["Q_tilde"] = matrix_to_json(*s.Q_tilde);
    synth["tau_mode"] = tau_mode_name(s.tau_mode);
    synth["mu_schedule"] = s.mu_schedule;
    synth["grid_density"] = s.grid_density;
    synth["hessian_samples"] = s.hessian_samples;
    synth["delta_samples"] = s.delta_samples;
    synth["seed"] = s.seed;
    synth["ve_form"] = form_name(s.form);

    json ocp{{"horizon", c.horizon},
             {"kkt_tol", c.solver.kkt_tol},
             {"constraint_tol", c.solver.constraint_tol},
             {"max_iterations", c.solver.max_iterations},
             {"outer_rounds", c.solver.outer_rounds},
             {"initial_penalty", c.solver.initial_penalty},
             {"memory", c.solver.memory}};

    json sim{{"T", c.simulation.steps},
             {"n_runs", c.simulation.n_runs},
             {"seed", c.simulation.seed},
             {"amplitude", c.simulation.amplitude}};
    if (c.simulation.x0) sim["x0"] = vector_to_json(*c.simulation.x0);

    json out{{"directory", c.output.directory}, {"study", c.output.study}};

    return {{"model", model}, {"cost", cost}, {"synthesis", synth}, {"ocp", ocp}, {"simulation", sim}, {"output", out}};
}

std::string serialize(const StudyConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const StudyConfig& config) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const unsigned char ch : serialize(config)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PlantModel build_model(const StudyConfig& c) {
    const ModelConfig& m = c.model;
    if (!m.preset.empty()) {
        PlantModel base = [&] {
            try {
                return preset_model(m.preset);
            } catch (const InputError& e) {
                throw ConfigError("model.preset", e.what());
            }
        }();
        if (m.state_box || m.input_box) {
            throw ConfigError("model", "state_box and input_box are fixed by the preset");
        }
        if (m.disturbance_box) base = base.with_disturbance_box(*m.disturbance_box);
        try {
            return base.with_sample_time(m.sample_time).with_substeps(m.substeps);
        } catch (const InputError& e) {
            throw ConfigError("model", e.what());
        }
    }
    require(m.state_box.has_value(), "model.state_box", "required with 'rhs'");
    require(m.input_box.has_value(), "model.input_box", "required with 'rhs'");
    const Box w_box = m.disturbance_box ? *m.disturbance_box : Box(Vector::Zero(1), Vector::Zero(1));
    require(static_cast<int>(m.rhs.size()) == m.state_box->dim(), "model.rhs",
            "expected one expression per state (" + std::to_string(m.state_box->dim()) + ")");
    try {
        return make_expression_model(c.output.study, m.rhs, *m.state_box, *m.input_box, w_box, m.sample_time,
                                     m.substeps);
    } catch (const InputError& e) {
        throw ConfigError("model.rhs", e.what());
    }
}

Equilibrium build_equilibrium(const StudyConfig& c) {
    const ModelConfig& m = c.model;
    std::optional<Equilibrium> base;
    if (!m.preset.empty()) base = preset_equilibrium(m.preset);
    if (!base && (!m.x_s || !m.u_s)) throw ConfigError("model.equilibrium", "x_s and u_s are required");
    Equilibrium eq = base ? *base : Equilibrium{};
    if (m.x_s) eq.x_s = *m.x_s;
    if (m.u_s) eq.u_s = *m.u_s;
    return eq;
}

StageCost build_cost(const StudyConfig& c) {
    const PlantModel model = build_model(c);
    StageCost cost = StageCost::from_expressions(model.state_dim(), model.input_dim(), c.cost.economic,
                                                 c.cost.constraint, c.cost.penalty_weight);
    if (c.cost.regularization > 0.0) {
        const Vector ref = c.cost.regularization_reference ? *c.cost.regularization_reference
                                                           : build_equilibrium(c).u_s;
        cost = cost.with_regularization(c.cost.regularization, ref);
    }
    return cost;
}

SynthesisOptions build_synthesis_options(const StudyConfig& c) {
    SynthesisOptions o;
    const auto& s = c.synthesis;
    o.K = s.K;
    if (s.lqr_Q) o.lqr_Q = *s.lqr_Q;
    if (s.lqr_R) o.lqr_R = *s.lqr_R;
    o.Q_tilde = s.Q_tilde;
    o.tau_mode = s.tau_mode;
    o.mu_schedule = s.mu_schedule;
    o.grid_density = s.grid_density;
    o.hessian_samples = s.hessian_samples;
    o.delta_samples = s.delta_samples;
    o.horizon = c.horizon;
    o.seed = s.seed;
    o.form = s.form;
    return o;
}

OcpProblem build_problem(const StudyConfig& c, const TerminalIngredients& ingredients) {
    OcpProblem p{build_model(c), build_cost(c), ingredients, c.horizon, c.solver};
    p.validate();
    return p;
}

Vector initial_state(const StudyConfig& c) {
    return c.simulation.x0 ? *c.simulation.x0 : build_equilibrium(c).x_s;
}

// ---------------------------------------------------------------------------
// Certificate

json to_json(const Certificate& cert) {
    const TerminalIngredients& t = cert.ingredients;
    json ing{{"x_s", vector_to_json(t.x_s)},
             {"u_s", vector_to_json(t.u_s)},
             {"K", matrix_to_json(t.K)},
             {"A", matrix_to_json(t.A)},
             {"B", matrix_to_json(t.B)},
             {"Q_tilde", matrix_to_json(t.Q_tilde)},
             {"P_tilde", matrix_to_json(t.P_tilde)},
             {"tau", number_to_json(t.tau)},
             {"Q", matrix_to_json(t.Q)},
             {"q", vector_to_json(t.q)},
             {"P", matrix_to_json(t.P)},
             {"p", vector_to_json(t.p)},
             {"mu", number_to_json(t.mu)},
             {"ve_form", form_name(t.form)}};
    const VerificationReport& r = cert.report;
    json rep{{"grid_points", r.grid_points},
             {"c2", number_to_json(r.c2)},
             {"worst_vs_decrease_margin", number_to_json(r.worst_vs_decrease_margin)},
             {"worst_vf_margin", number_to_json(r.worst_vf_margin)},
             {"worst_admissibility_margin", number_to_json(r.worst_admissibility_margin)},
             {"invariance_violations", r.invariance_violations},
             {"passed", r.passed}};
    const DeltaEstimate& d = cert.delta;
    json del{{"L_f", number_to_json(d.L_f)},         {"L_s", number_to_json(d.L_s)},
             {"c2", number_to_json(d.c2)},           {"lambda_max", number_to_json(d.lambda_max)},
             {"tau", number_to_json(d.tau)},         {"delta", number_to_json(d.delta)},
             {"samples", d.samples},                 {"heuristic", d.heuristic}};
    return {{"config_hash", cert.config_hash},
            {"config", to_json(cert.config)},
            {"ingredients", ing},
            {"verification", rep},
            {"delta", del}};
}

Certificate certificate_from_json(const json& j) {
    Certificate cert;
    Section root(j, "");
    cert.config_hash = root.text("config_hash", "");
    require(root.has("config"), "config", "required");
    cert.config = from_json(root.raw("config"));

    auto is = root.child("ingredients");
    require(is.has_value(), "ingredients", "required");
    TerminalIngredients& t = cert.ingredients;
    const auto need_v = [&](const char* k) {
        auto v = is->vector(k);
        require(v.has_value(), is->field(k), "required");
        return *v;
    };
    const auto need_m = [&](const char* k) {
        auto m = is->matrix(k);
        require(m.has_value(), is->field(k), "required");
        return *m;
    };
    t.x_s = need_v("x_s");
    t.u_s = need_v("u_s");
    t.K = need_m("K");
    t.A = need_m("A");
    t.B = need_m("B");
    t.Q_tilde = need_m("Q_tilde");
    t.P_tilde = need_m("P_tilde");
    t.tau = is->number("tau", std::numeric_limits<double>::quiet_NaN());
    t.Q = need_m("Q");
    t.q = need_v("q");
    t.P = need_m("P");
    t.p = need_v("p");
    t.mu = is->number("mu", 0.0);
    t.form = parse_form(is->text("ve_form", "transposed_half"), is->field("ve_form"));
    is->finish();

    const auto n = t.x_s.size();
    const auto m = t.u_s.size();
    const auto square = [&](const Matrix& a, const char* k) {
        require(a.rows() == n && a.cols() == n, std::string("ingredients.") + k, "expected n x n");
    };
    square(t.A, "A");
    square(t.Q_tilde, "Q_tilde");
    square(t.P_tilde, "P_tilde");
    square(t.Q, "Q");
    square(t.P, "P");
    require(t.B.rows() == n && t.B.cols() == m, "ingredients.B", "expected n x m");
    require(t.K.rows() == m && t.K.cols() == n, "ingredients.K", "expected m x n");
    require(t.q.size() == n && t.p.size() == n, "ingredients", "q and p need length n");
    require(std::isfinite(t.tau) && t.tau > 0.0, "ingredients.tau", "must be positive");

    if (auto rs = root.child("verification")) {
        VerificationReport& r = cert.report;
        r.grid_points = static_cast<int>(rs->integer("grid_points", 0));
        r.c2 = rs->number("c2", 0.0);
        r.worst_vs_decrease_margin = rs->number("worst_vs_decrease_margin", 0.0);
        r.worst_vf_margin = rs->number("worst_vf_margin", 0.0);
        r.worst_admissibility_margin = rs->number("worst_admissibility_margin", 0.0);
        r.invariance_violations = static_cast<int>(rs->integer("invariance_violations", 0));
        if (rs->has("passed")) {
            const json& v = rs->raw("passed");
            require(v.is_boolean(), rs->field("passed"), "expected a boolean");
            r.passed = v.get<bool>();
        }
        rs->finish();
    }
    if (auto ds = root.child("delta")) {
        DeltaEstimate& d = cert.delta;
        d.L_f = ds->number("L_f", 0.0);
        d.L_s = ds->number("L_s", 0.0);
        d.c2 = ds->number("c2", 0.0);
        d.lambda_max = ds->number("lambda_max", 0.0);
        d.tau = ds->number("tau", 0.0);
        d.delta = ds->number("delta", 0.0);
        d.samples = static_cast<int>(ds->integer("samples", 0));
        if (ds->has("heuristic")) {
            const json& v = ds->raw("heuristic");
            require(v.is_boolean(), ds->field("heuristic"), "expected a boolean");
            d.heuristic = v.get<bool>();
        }
        ds->finish();
    }
    root.finish();
    return cert;
}

void save_certificate(const Certificate& cert, const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << to_json(cert).dump(2) << '\n';
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

Certificate load_certificate(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read certificate '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": malformed certificate at byte " + std::to_string(e.byte) + ": " +
                                  e.what());
    }
    try {
        return certificate_from_json(j);
    } catch (const ConfigError& e) {
        throw ConfigError(e.field(), path.string() + ": " + e.what());
    }
}

}  // namespace empc
