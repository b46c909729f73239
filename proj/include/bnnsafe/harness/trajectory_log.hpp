#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "bnnsafe/harness/model_file.hpp"
#include "bnnsafe/sim/episode.hpp"

namespace bnnsafe::harness {

inline constexpr const char* kTrajectoryHeader = "episode,step,t,x,y,heading,speed,steering,eta2,mi,warning,outcome";

// One row per record. Confidence columns stay empty for unmonitored episodes
// and for the terminal record.
inline void write_trajectory_rows(std::ostream& out, long episode, const sim::EpisodePath& path, double dt) {
  const char* outcome = sim::to_string(path.outcome);
  for (const auto& r : path.records) {
    out << episode << ',' << r.step << ',' << format_double(r.step * dt) << ',' << format_double(r.state.x) << ','
        << format_double(r.state.y) << ',' << format_double(r.state.heading) << ',' << format_double(r.state.speed)
        << ',';
    if (r.steering) out << format_double(*r.steering);
    out << ',';
    if (path.monitored && r.report) {
      out << format_double(r.report->eta2) << ',' << format_double(r.report->mutual_info) << ','
          << uq::to_string(r.warning);
    } else {
      out << ",,";
    }
    out << ',' << outcome << '\n';
  }
}

inline void write_trajectory_log(std::ostream& out, const std::vector<sim::EpisodePath>& paths, double dt,
                                 long first_episode = 0) {
  out << kTrajectoryHeader << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i)
    write_trajectory_rows(out, first_episode + static_cast<long>(i), paths[i], dt);
}

}  // namespace bnnsafe::harness
