#pragma once

// Ladder orchestration.  One trajectory is strictly sequential; distinct
// (scenario, eps) runs share nothing mutable and execute in parallel worker
// slots.  Without a cone factor eps never enters the equations, so a single
// trajectory serves every rung of the ladder.

#include <future>
#include <vector>

#include "ckrf/bounds.hpp"
#include "ckrf/flow.hpp"
#include "ckrf/monitors.hpp"
#include "ckrf/scenario.hpp"

namespace ckrf {

struct ScenarioRun {
    Setup setup;
    std::vector<MonitorSeries> series;     // aligned with the eps ladder
    std::vector<FlowState> final_state;    // last emitted sample per rung
    BoundReport report;
};

inline ScenarioRun run_scenario(const Scenario& sc, int jobs = 1) {
    ScenarioRun out;
    out.setup = make_setup(sc);
    const std::vector<double>& ladder = sc.eps_ladder;
    out.series.resize(ladder.size());
    out.final_state.resize(ladder.size());
    const RunPolicy policy = standard_policy(out.setup);

    if (out.setup.cone_factor < 0) {
        const FlowContext cx = make_context(out.setup, ladder[0]);
        const Trajectory traj = run_flow(cx, policy);
        for (std::size_t r = 0; r < ladder.size(); ++r) {
            FlowContext cr = make_context(out.setup, ladder[r]);
            out.series[r] = make_series(cr, traj);
            if (!traj.samples.empty()) out.final_state[r] = traj.samples.back();
        }
    } else {
        jobs = std::max(1, jobs);
        for (std::size_t base = 0; base < ladder.size(); base += jobs) {
            const std::size_t hi = std::min(ladder.size(), base + jobs);
            std::vector<std::future<std::pair<MonitorSeries, FlowState>>> slots;
            for (std::size_t r = base; r < hi; ++r) {
                slots.push_back(std::async(std::launch::async, [&, r] {
                    const FlowContext cx = make_context(out.setup, ladder[r]);
                    const Trajectory traj = run_flow(cx, policy);
                    MonitorSeries se = make_series(cx, traj);
                    FlowState last = traj.samples.empty() ? FlowState{} : traj.samples.back();
                    return std::make_pair(std::move(se), std::move(last));
                }));
            }
            for (std::size_t r = base; r < hi; ++r) {
                auto pr = slots[r - base].get();
                out.series[r] = std::move(pr.first);
                out.final_state[r] = std::move(pr.second);
            }
        }
    }
    out.report = check_bounds(out.setup, out.series);
    return out;
}

}  // namespace ckrf
