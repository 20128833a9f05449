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
#ifndef EMPC_CONFIG_HPP
#define EMPC_CONFIG_HPP

#include "empc/closed_loop.hpp"
#include "empc/terminal.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace empc {

/// Raised for malformed or inconsistent configuration; `field` is the
/// dotted path of the offending key ("synthesis.K").
class ConfigError : public InputError {
public:
    ConfigError(std::string field, const std::string& what)
        : InputError(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct ModelConfig {
    std::string preset;             ///< empty when rhs is given
    std::vector<std::string> rhs;   ///< expressions over x1.., u1.., w1..
    std::optional<Box> state_box;
    std::optional<Box> input_box;
    std::optional<Box> disturbance_box;
    double sample_time = 0.25;
    int substeps = 4;
    std::optional<Vector> x_s;
    std::optional<Vector> u_s;
};

struct CostConfig {
    std::string economic;
    std::optional<std::string> constraint;
    double penalty_weight = 1e3;
    double regularization = 0.0;            ///< rho in rho |u - u_ref|^2
    std::optional<Vector> regularization_reference;  ///< u_s when empty
};

struct SynthesisConfig {
    std::optional<Matrix> K;
    std::optional<Matrix> lqr_Q;
    std::optional<Matrix> lqr_R;
    std::optional<Matrix> Q_tilde;
    TauMode tau_mode = TauMode::Cover;
    std::vector<double> mu_schedule{0.0, 0.1, 1.0, 10.0, 100.0, 1000.0};
    int grid_density = 10000;
    int hessian_samples = 1000;
    int delta_samples = 1000;
    std::uint64_t seed = 1;
    TerminalCostForm form = TerminalCostForm::TransposedHalf;
};

struct SimulationConfig {
    std::optional<Vector> x0;  ///< x_s when empty
    int steps = 100;           ///< T
    int n_runs = 30;
    std::uint64_t seed = 1;
    double amplitude = 1.0;    ///< scale applied to the disturbance box
};

struct OutputConfig {
    std::string directory = "out";
    std::string study = "study";
};

struct StudyConfig {
    ModelConfig model;
    CostConfig cost;
    SynthesisConfig synthesis;
    int horizon = 16;
    SolverSettings solver;
    SimulationConfig simulation;
    OutputConfig output;
};

/// Parses and fully validates a JSON config. Unknown keys are rejected.
StudyConfig parse_config(const std::string& text);
StudyConfig load_config(const std::filesystem::path& path);

/// Normalized form with every field explicit.
nlohmann::json to_json(const StudyConfig& config);
StudyConfig from_json(const nlohmann::json& j);
std::string serialize(const StudyConfig& config);

/// FNV-1a 64 of serialize(config), as 16 hex digits.
std::string config_hash(const StudyConfig& config);

PlantModel build_model(const StudyConfig& config);
Equilibrium build_equilibrium(const StudyConfig& config);
StageCost build_cost(const StudyConfig& config);
SynthesisOptions build_synthesis_options(const StudyConfig& config);
OcpProblem build_problem(const StudyConfig& config, const TerminalIngredients& ingredients);
Vector initial_state(const StudyConfig& config);

/// Synthesis output bundled with the config that produced it.
struct Certificate {
    StudyConfig config;
    std::string config_hash;
    TerminalIngredients ingredients;
    VerificationReport report;
    DeltaEstimate delta;
};

nlohmann::json to_json(const Certificate& certificate);
Certificate certificate_from_json(const nlohmann::json& j);
void save_certificate(const Certificate& certificate, const std::filesystem::path& path);
/// Throws ConfigError with the parse location on malformed input.
Certificate load_certificate(const std::filesystem::path& path);

}  // namespace empc

#endif  // EMPC_CONFIG_HPP
