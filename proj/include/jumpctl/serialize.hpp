#pragma once

#include "jumpctl/backward.hpp"
#include "jumpctl/forward.hpp"
#include "jumpctl/hjb.hpp"
#include "jumpctl/problem.hpp"
#include "jumpctl/verify.hpp"

#include <json.hpp>

#include <ostream>

namespace jumpctl {

using Json = nlohmann::ordered_json;

Json to_json(const Estimate& e);
Json to_json(const DissipativityCertificate& c);
Json to_json(const ViolationReport& r);
Json to_json(const AdmissibilityEstimate& a);
Json to_json(const LpNormEstimates& e);
Json to_json(const DecayReport& r);
Json to_json(const ContinuousDependenceReport& r);
Json to_json(const PoissonMomentReport& r);
Json to_json(const ComparisonReport& r);
Json to_json(const AprioriReport& r);
Json to_json(const PicardReport& r);
Json to_json(const ValueProperties& p);
Json to_json(const DppReport& r);
Json to_json(const VerificationReport& r);

/// time, path, state..., control... (one row per path and node) for the
/// first max_paths paths.
void write_ensemble_csv(std::ostream& os, const PathEnsemble& ens, const ProblemSpec& spec,
                        std::size_t max_paths = static_cast<std::size_t>(-1));
/// time, value, se.
void write_moment_csv(std::ostream& os, const std::vector<MomentPoint>& curve);
/// time, Y_mean, Y_se, Z_mean..., K_atom_j...
void write_bsde_csv(std::ostream& os, const BsdeSolution& sol);
/// x..., value, policy_index, residual.
void write_value_csv(std::ostream& os, const DiscreteValueFunction& V);

}  // namespace jumpctl
