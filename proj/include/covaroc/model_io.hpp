#pragma once

#include <string>

#include "json.hpp"

#include "covaroc/inference.hpp"
#include "covaroc/metrics.hpp"

namespace covaroc {

inline constexpr const char* kModelFormat = "covaroc-model/1";

// Both fitted posteriors plus everything needed to answer queries later.
struct Model {
    Posterior match;
    Posterior nonmatch;
    Orientation orientation = Orientation::Distance;
    std::uint64_t seed = 0;
    FitConfig config;  // echo of the fit configuration
};

nlohmann::json fit_config_to_json(const FitConfig& config);
FitConfig fit_config_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace covaroc
