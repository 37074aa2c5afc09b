#include "ards/splits.hpp"

#include "ards/error.hpp"
#include "ards/rng.hpp"

#include <cmath>
#include <unordered_set>

namespace ards {

std::string split_scheme_name(SplitScheme scheme) {
    switch (scheme) {
        case SplitScheme::KFold: return "kfold";
        case SplitScheme::RandomKFold: return "random_kfold";
        case SplitScheme::Holdout: return "holdout";
        case SplitScheme::Bootstrap: return "bootstrap";
    }
    throw ConfigInvalid("unknown split scheme value");
}

SplitScheme split_scheme_from_name(const std::string& name) {
    if (name == "kfold") return SplitScheme::KFold;
    if (name == "random_kfold") return SplitScheme::RandomKFold;
    if (name == "holdout") return SplitScheme::Holdout;
    if (name == "bootstrap") return SplitScheme::Bootstrap;
    throw ParseError("unknown split scheme '" + name +
                     "' (expected kfold, random_kfold, holdout, or bootstrap)");
}

namespace {

// Patient ids per class, in cohort order, after validating uniqueness and
// that both classes are represented.
struct ByClass {
    std::vector<std::string> ids[2];
};

ByClass partition_by_class(const std::vector<PatientRef>& patients) {
    ByClass out;
    std::unordered_set<std::string> seen;
    for (const auto& p : patients) {
        if (!seen.insert(p.patient_id).second) {
            throw DuplicatePatient("patient '" + p.patient_id +
                                   "' appears twice in the cohort");
        }
        out.ids[p.label == Label::Ards ? 1 : 0].push_back(p.patient_id);
    }
    if (out.ids[0].empty() || out.ids[1].empty()) {
        throw SingleClass("splitting needs patients of both classes");
    }
    return out;
}

const char* class_word(int c) { return c == 1 ? "ards" : "non_ards"; }

void check_fraction(double train_fraction) {
    if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
        throw ConfigInvalid("train fraction must lie strictly between 0 and 1, got " +
                            std::to_string(train_fraction));
    }
}

}  // namespace

SplitPlan stratified_kfold(const std::vector<PatientRef>& patients, std::size_t k,
                           std::uint64_t seed) {
    if (k < 2) {
        throw ConfigInvalid("stratified k-fold needs k >= 2, got " + std::to_string(k));
    }
    ByClass by = partition_by_class(patients);
    for (int c = 0; c < 2; ++c) {
        if (by.ids[c].size() % k != 0) {
            throw UnbalancedCohort(std::string(class_word(c)) + " count " +
                                   std::to_string(by.ids[c].size()) +
                                   " is not divisible by k=" + std::to_string(k));
        }
    }
    Rng rng(derive_seed(seed));
    rng.shuffle(by.ids[0]);
    rng.shuffle(by.ids[1]);

    SplitPlan plan;
    plan.scheme = SplitScheme::KFold;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        auto& a = plan.assignments[f];
        for (int c = 0; c < 2; ++c) {
            const auto& ids = by.ids[c];
            const std::size_t chunk = ids.size() / k;
            for (std::size_t i = 0; i < ids.size(); ++i) {
                (i / chunk == f ? a.test : a.train).push_back(ids[i]);
            }
        }
    }
    return plan;
}

SplitPlan holdout_split(const std::vector<PatientRef>& patients, double train_fraction,
                        std::uint64_t seed) {
    check_fraction(train_fraction);
    ByClass by = partition_by_class(patients);
    Rng rng(derive_seed(seed));

    SplitPlan plan;
    plan.scheme = SplitScheme::Holdout;
    plan.train_fraction = train_fraction;
    plan.seed = seed;
    plan.assignments.resize(1);
    auto& a = plan.assignments[0];
    for (int c = 0; c < 2; ++c) {
        auto& ids = by.ids[c];
        rng.shuffle(ids);
        const auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(ids.size())));
        if (n_train == 0) {
            throw EmptySide(std::string(class_word(c)) + " training side is empty at "
                            "fraction " + std::to_string(train_fraction));
        }
        if (n_train == ids.size()) {
            throw EmptySide(std::string(class_word(c)) + " test side is empty at "
                            "fraction " + std::to_string(train_fraction));
        }
        for (std::size_t i = 0; i < ids.size(); ++i) {
            (i < n_train ? a.train : a.test).push_back(ids[i]);
        }
    }
    return plan;
}

SplitPlan bootstrap_split(const std::vector<PatientRef>& patients, double train_fraction,
                          std::uint64_t seed) {
    check_fraction(train_fraction);
    ByClass by = partition_by_class(patients);
    Rng rng(derive_seed(seed));

    SplitPlan plan;
    plan.scheme = SplitScheme::Bootstrap;
    plan.train_fraction = train_fraction;
    plan.seed = seed;
    plan.assignments.resize(1);
    auto& a = plan.assignments[0];
    for (int c = 0; c < 2; ++c) {
        const auto& ids = by.ids[c];
        const auto n_draws = static_cast<std::size_t>(
            std::floor(train_fraction * static_cast<double>(ids.size())));
        if (n_draws == 0) {
            throw EmptySide(std::string(class_word(c)) + " class is too small to draw "
                            "from at fraction " + std::to_string(train_fraction));
        }
        std::vector<char> drawn(ids.size(), 0);
        for (std::size_t i = 0; i < n_draws; ++i) {
            const std::size_t pick = rng.bounded(ids.size());
            drawn[pick] = 1;
            a.train.push_back(ids[pick]);
        }
        std::size_t left_out = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!drawn[i]) {
                a.test.push_back(ids[i]);
                ++left_out;
            }
        }
        if (left_out == 0) {
            throw EmptySide(std::string(class_word(c)) + " class had every patient "
                            "drawn; no test side remains");
        }
    }
    return plan;
}

std::vector<BreathInstance> oversample_instances(
    const std::vector<BreathInstance>& instances, std::uint64_t seed) {
    std::vector<std::size_t> members[2];
    for (std::size_t i = 0; i < instances.size(); ++i) {
        members[instances[i].label == Label::Ards ? 1 : 0].push_back(i);
    }
    if (members[0].empty() || members[1].empty()) {
        throw SingleClass("oversampling needs instances of both classes");
    }
    std::vector<BreathInstance> out = instances;
    const int minority = members[0].size() < members[1].size() ? 0 : 1;
    const auto& pool = members[minority];
    const std::size_t deficit = members[1 - minority].size() - pool.size();
    Rng rng(derive_seed(seed));
    for (std::size_t i = 0; i < deficit; ++i) {
        out.push_back(instances[pool[rng.bounded(pool.size())]]);
    }
    return out;
}

}  // namespace ards
