#include "jumpctl/levy.hpp"

#include <algorithm>
#include <random>
#include <sstream>

namespace jumpctl {

LevyModel::LevyModel(std::vector<JumpAtom> atoms) : atoms_(std::move(atoms)) {
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
        const auto& a = atoms_[j];
        if (a.mark.size() == 0 || a.mark.size() > kMaxDim)
            throw DomainError("LevyModel: atom " + std::to_string(j) + " has an invalid mark dimension");
        if (j == 0) mark_dim_ = static_cast<std::size_t>(a.mark.size());
        if (static_cast<std::size_t>(a.mark.size()) != mark_dim_)
            throw DomainError("LevyModel: atom " + std::to_string(j) + " has a mark of different dimension");
        if (!a.mark.allFinite() || a.mark.norm() == 0.0)
            throw DomainError("LevyModel: atom " + std::to_string(j) + " has a zero or nonfinite mark");
        if (!(a.rate > 0.0) || !std::isfinite(a.rate))
            throw DomainError("LevyModel: atom " + std::to_string(j) + " needs a positive finite rate");
        total_rate_ += a.rate;
    }
}

double LevyModel::small_jump_integral() const {
    double sum = 0.0;
    for (const auto& a : atoms_) sum += a.rate * std::min(1.0, a.mark.squaredNorm());
    return sum;
}

namespace detail {

void throw_nonfinite(std::size_t atom_index, const Vec& mark) {
    std::ostringstream os;
    os << "mark function is nonfinite at atom " << atom_index << " (mark " << mark.transpose() << ")";
    throw EvaluationError(os.str());
}

}  // namespace detail

std::vector<JumpEvent> sample_jumps(const LevyModel& model, double t0, double t1, Stream& stream) {
    if (!(t0 < t1)) throw DomainError("sample_jumps: requires t0 < t1");
    std::vector<JumpEvent> events;
    if (model.empty()) return events;

    std::vector<double> weights;
    weights.reserve(model.size());
    for (const auto& a : model.atoms()) weights.push_back(a.rate);
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());

    const double lambda = model.total_rate();
    double t = t0;
    for (;;) {
        t += stream.exponential(lambda);
        if (t > t1) break;
        events.push_back({t, pick(stream.engine())});
    }
    return events;
}

}  // namespace jumpctl
