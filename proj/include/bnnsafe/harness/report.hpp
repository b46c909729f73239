#pragma once

#include <string>
#include <vector>

#include "bnnsafe/harness/model_file.hpp"
#include "bnnsafe/statcheck.hpp"

namespace bnnsafe::harness {

struct ReportCell {
  std::string method;
  std::string scenario;
  std::string weather;
  bool monitored = false;
  stat::SafetyEstimate estimate;
};

inline json cell_to_json(const ReportCell& c) {
  const auto& e = c.estimate;
  return json{{"method", c.method},
              {"scenario", c.scenario},
              {"weather", c.weather},
              {"monitored", c.monitored},
              {"theta", e.spec.theta},
              {"gamma", e.spec.gamma},
              {"n", e.n},
              {"eta_hat", e.eta_hat},
              {"safe", e.safe_count},
              {"completed", e.completed_count},
              {"handover", e.handover_count},
              {"collided", e.collision_count},
              {"out_of_bounds", e.out_of_bounds_count},
              {"controller_failure", e.failure_count},
              {"autonomy_rate", e.autonomy_rate},
              {"warning_steps", json{{"W0", e.warning_steps[0]}, {"W1", e.warning_steps[1]}, {"W2", e.warning_steps[2]}}}};
}

inline std::string summary_report(const std::vector<ReportCell>& cells, const json& config_echo) {
  json doc{{"format_version", 1}, {"config", config_echo}, {"cells", json::array()}};
  for (const auto& c : cells) doc["cells"].push_back(cell_to_json(c));
  return doc.dump(2) + "\n";
}

}  // namespace bnnsafe::harness
