#pragma once

#include <json.hpp>

#include "ponzilens/metrics.hpp"
#include "ponzilens/selection.hpp"
#include "ponzilens/trees.hpp"

namespace ponzilens {

// JSON shapes shared by model files, run reports, and the CLI. ordered_json
// keeps key order deterministic so reruns stay byte-identical.
nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json metric_report_to_json(const MetricReport& report);
nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm);
nlohmann::ordered_json mcnemar_to_json(const McNemarResult& result);
nlohmann::ordered_json search_result_to_json(const SearchResult& result);
nlohmann::ordered_json rfe_trace_to_json(const RfeTrace& trace);

}  // namespace ponzilens
