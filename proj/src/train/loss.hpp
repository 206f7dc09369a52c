#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/tape.hpp"
#include "data/features.hpp"
#include "model/model.hpp"

namespace axf {

// Family NLL tape ops. `raw` holds unconstrained head outputs with the
// family's parameter count in the trailing dim; `y` the ground-truth values
// and `weight` a per-prediction factor (0 silences a cell exactly, in both
// the value and the gradient). Each returns a scalar node.
VarId poisson_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight);
VarId bernoulli_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight);
VarId log_gaussian_nll_op(Tape& t, VarId raw, Tensor y, Tensor weight);
VarId discrete_nll_op(Tape& t, VarId raw, Tensor labels, Tensor weight);

struct LossBreakdown {
    double total = 0.0;
    // "player.<action>", "team.<action>", "outcome"
    std::vector<std::pair<std::string, double>> per_target;
};

struct LossResult {
    VarId total = kNoVar;
    LossBreakdown values;
};

// Sums the family-appropriate NLL over every (action, modality) head plus
// the outcome head, aligned to the forward's grid width. loss_weights are
// per-action multipliers (default 1).
LossResult match_loss(Tape& t, const ModelForward& fwd, const ModelConfig& cfg, const TargetBundle& targets,
                      const MatchValidity* validity = nullptr,
                      const std::map<std::string, double>* loss_weights = nullptr);

}  // namespace axf
