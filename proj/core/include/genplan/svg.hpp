#pragma once

#include <string>
#include <vector>

#include "genplan/experiments.hpp"
#include "genplan/mask_cache.hpp"
#include "genplan/planner.hpp"
#include "genplan/world.hpp"

namespace genplan {

// World-frame drawing window, metres.
struct SvgView {
  double x_min = -1.0;
  double x_max = 7.0;
  double y_min = -3.5;
  double y_max = 3.5;
  double px_per_m = 80.0;
};

// Single planning tick: obstacles, the ROI box at the vehicle, every recorded
// sample as <polyline class="sample"> (masked ones also carry "masked") and
// the chosen plan as a <path class="chosen">.
std::string render_plan_svg(const World& world, const PlanResult& result, const AtomicGrid& roi,
                            const SvgView& view = {});

// Episode rollout: obstacles, the plans issued along the way as
// <path class="plan"> and the executed trajectory as <path class="executed">.
std::string render_episode_svg(const World& world, const EpisodeTrace& trace, ControllerKind controller,
                               const SvgView& view = {});

}  // namespace genplan
