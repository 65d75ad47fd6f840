#pragma once

// JSON mappings (nlohmann ADL hooks) for the report, checkpoint and config
// documents. from_json throws ValidationError on malformed documents.

#include <json.hpp>

#include "gmadl/backtest.hpp"
#include "gmadl/data.hpp"
#include "gmadl/gradients.hpp"
#include "gmadl/loss.hpp"
#include "gmadl/models.hpp"
#include "gmadl/tuning.hpp"

namespace gmadl {

using json = nlohmann::json;

void to_json(json& j, const GmadlParams& p);
void from_json(const json& j, GmadlParams& p);

void to_json(json& j, const GradCheckReport& r);

void to_json(json& j, const ModelSpec& s);
void from_json(const json& j, ModelSpec& s);
/// {"spec": ..., "weights": [...], "optimizer": {"m", "v", "step"}}
void to_json(json& j, const ModelState& s);
void from_json(const json& j, ModelState& s);

void to_json(json& j, const TrainConfig& c);
void from_json(const json& j, TrainConfig& c);

void to_json(json& j, const Standardizer& s);
void from_json(const json& j, Standardizer& s);

void to_json(json& j, const IndexRange& r);
void to_json(json& j, const WalkForwardPlan& p);

void to_json(json& j, const SignalPolicy& p);
void from_json(const json& j, SignalPolicy& p);
void to_json(json& j, const PerformanceMetrics& m);
void to_json(json& j, const BacktestReport& r);

void to_json(json& j, const SearchSpace& s);
void from_json(const json& j, SearchSpace& s);
void to_json(json& j, const TrialConfig& c);
void to_json(json& j, const TrialResult& r);
void to_json(json& j, const SearchResult& r);
void to_json(json& j, const BSensitivityReport& r);

}  // namespace gmadl
