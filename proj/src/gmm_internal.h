#pragma once

#include <span>
#include <vector>

#include "cbir/local_descriptors.h"

namespace cbir {

// log(weight) - 0.5 * sum log(2 pi var) for every component.
std::vector<double> gmm_log_norms(const GmmModel& g);

// Fills `post` with responsibilities of x; returns log p(x).
double gmm_posteriors(const GmmModel& g, const std::vector<double>& norms, std::span<const float> x,
                      std::vector<double>& post);

}  // namespace cbir
