#include <doctest.h>

#include <ards/error.hpp>
#include <ards/splits.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

using namespace ards;

namespace {

std::vector<PatientRef> cohort(std::size_t n_neg, std::size_t n_pos) {
    std::vector<PatientRef> out;
    for (std::size_t i = 0; i < n_neg; ++i) {
        out.push_back({"neg" + std::to_string(i), Label::NonArds});
    }
    for (std::size_t i = 0; i < n_pos; ++i) {
        out.push_back({"pos" + std::to_string(i), Label::Ards});
    }
    return out;
}

std::size_t count_prefix(const std::vector<std::string>& ids, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& id : ids) n += id.rfind(prefix, 0) == 0 ? 1 : 0;
    return n;
}

bool same_plan(const SplitPlan& a, const SplitPlan& b) {
    if (a.assignments.size() != b.assignments.size()) return false;
    for (std::size_t i = 0; i < a.assignments.size(); ++i) {
        if (a.assignments[i].train != b.assignments[i].train) return false;
        if (a.assignments[i].test != b.assignments[i].test) return false;
    }
    return true;
}

BreathInstance stub_instance(const std::string& pid, Label label, std::size_t start) {
    BreathInstance inst;
    inst.patient_id = pid;
    inst.label = label;
    inst.start_index = start;
    inst.values = {1.0, -1.0};
    return inst;
}

}  // namespace

TEST_CASE("split scheme names round-trip") {
    for (SplitScheme s : {SplitScheme::KFold, SplitScheme::RandomKFold,
                          SplitScheme::Holdout, SplitScheme::Bootstrap}) {
        CHECK(split_scheme_from_name(split_scheme_name(s)) == s);
    }
    CHECK(split_scheme_name(SplitScheme::Bootstrap) == "bootstrap");
    CHECK_THROWS_AS(split_scheme_from_name("leave_one_out"), ParseError);
}

TEST_CASE("stratified k-fold tiles a balanced cohort into equal folds") {
    const auto patients = cohort(40, 40);
    const auto plan = stratified_kfold(patients, 5, 401);
    REQUIRE(plan.assignments.size() == 5);
    CHECK(plan.scheme == SplitScheme::KFold);
    CHECK(plan.k == 5);

    std::multiset<std::string> tested;
    for (const auto& a : plan.assignments) {
        CHECK(a.test.size() == 16);
        CHECK(a.train.size() == 64);
        CHECK(count_prefix(a.test, "neg") == 8);
        CHECK(count_prefix(a.test, "pos") == 8);
        const std::set<std::string> train_set(a.train.begin(), a.train.end());
        CHECK(train_set.size() == a.train.size());  // k-fold never repeats a patient
        for (const auto& id : a.test) CHECK(train_set.count(id) == 0);
        tested.insert(a.test.begin(), a.test.end());
    }
    // The five test sides tile the cohort: everyone tested exactly once.
    CHECK(tested.size() == 80);
    for (const auto& p : patients) CHECK(tested.count(p.patient_id) == 1);
}

TEST_CASE("stratified k-fold on the smallest balanced cohort") {
    const auto plan = stratified_kfold(cohort(5, 5), 5, 409);
    for (const auto& a : plan.assignments) {
        CHECK(a.test.size() == 2);
        CHECK(count_prefix(a.test, "neg") == 1);
        CHECK(count_prefix(a.test, "pos") == 1);
        CHECK(a.train.size() == 8);
    }
}

TEST_CASE("stratified k-fold is seed-deterministic and seed-sensitive") {
    const auto patients = cohort(20, 20);
    const auto a = stratified_kfold(patients, 4, 419);
    const auto b = stratified_kfold(patients, 4, 419);
    const auto c = stratified_kfold(patients, 4, 421);
    CHECK(same_plan(a, b));
    CHECK_FALSE(same_plan(a, c));
}

TEST_CASE("stratified k-fold rejects bad cohorts") {
    CHECK_THROWS_AS(stratified_kfold(cohort(9, 5), 5, 1), UnbalancedCohort);
    CHECK_THROWS_AS(stratified_kfold(cohort(5, 9), 5, 1), UnbalancedCohort);
    CHECK_THROWS_AS(stratified_kfold(cohort(4, 4), 1, 1), ConfigInvalid);
    CHECK_THROWS_AS(stratified_kfold(cohort(4, 0), 2, 1), SingleClass);
    auto dup = cohort(4, 4);
    dup.push_back({"neg0", Label::NonArds});
    CHECK_THROWS_AS(stratified_kfold(dup, 2, 1), DuplicatePatient);
}

TEST_CASE("holdout split stratifies both sides") {
    const auto patients = cohort(40, 40);
    const auto plan = holdout_split(patients, 0.7, 431);
    REQUIRE(plan.assignments.size() == 1);
    const auto& a = plan.assignments[0];
    CHECK(a.train.size() == 56);
    CHECK(a.test.size() == 24);
    CHECK(count_prefix(a.train, "neg") == 28);
    CHECK(count_prefix(a.train, "pos") == 28);
    CHECK(count_prefix(a.test, "neg") == 12);
    CHECK(count_prefix(a.test, "pos") == 12);

    std::set<std::string> all(a.train.begin(), a.train.end());
    for (const auto& id : a.test) CHECK(all.insert(id).second);  // disjoint sides
    CHECK(all.size() == 80);                                     // and they tile
}

TEST_CASE("holdout rounds the training side to the nearest patient") {
    // 0.7 of 5 patients = 3.5, which rounds away from zero to 4.
    const auto plan = holdout_split(cohort(5, 5), 0.7, 433);
    CHECK(count_prefix(plan.assignments[0].train, "neg") == 4);
    CHECK(count_prefix(plan.assignments[0].test, "neg") == 1);
}

TEST_CASE("holdout seeds change membership but not sizes") {
    const auto patients = cohort(12, 12);
    const auto a = holdout_split(patients, 0.75, 439);
    const auto b = holdout_split(patients, 0.75, 443);
    CHECK(a.assignments[0].train.size() == b.assignments[0].train.size());
    CHECK(a.assignments[0].test.size() == b.assignments[0].test.size());
    CHECK_FALSE(same_plan(a, b));
    CHECK(same_plan(a, holdout_split(patients, 0.75, 439)));
}

TEST_CASE("holdout rejects fractions that empty a side") {
    CHECK_THROWS_AS(holdout_split(cohort(2, 2), 0.99, 1), EmptySide);
    CHECK_THROWS_AS(holdout_split(cohort(2, 2), 0.01, 1), EmptySide);
    CHECK_THROWS_AS(holdout_split(cohort(4, 4), 0.0, 1), ConfigInvalid);
    CHECK_THROWS_AS(holdout_split(cohort(4, 4), 1.0, 1), ConfigInvalid);
}

TEST_CASE("bootstrap trains on draws with replacement and tests the never-drawn") {
    const auto patients = cohort(40, 40);
    const auto plan = bootstrap_split(patients, 0.8, 449);
    REQUIRE(plan.assignments.size() == 1);
    const auto& a = plan.assignments[0];
    CHECK(count_prefix(a.train, "neg") == 32);  // floor(0.8 * 40) draws per class
    CHECK(count_prefix(a.train, "pos") == 32);

    const std::set<std::string> distinct_train(a.train.begin(), a.train.end());
    CHECK(distinct_train.size() < a.train.size());  // 32 draws of 40 nearly always repeat
    for (const auto& id : a.test) CHECK(distinct_train.count(id) == 0);
    // test = cohort minus the distinct draws, nothing dropped
    CHECK(a.test.size() == 80 - distinct_train.size());
    CHECK(same_plan(plan, bootstrap_split(patients, 0.8, 449)));
}

TEST_CASE("bootstrap with all-distinct draws leaves exactly the undrawn fraction") {
    const auto patients = cohort(5, 5);
    bool found = false;
    for (std::uint64_t seed = 0; seed < 64 && !found; ++seed) {
        const auto plan = bootstrap_split(patients, 0.8, seed);
        const auto& a = plan.assignments[0];
        const std::set<std::string> distinct(a.train.begin(), a.train.end());
        if (distinct.size() != a.train.size()) continue;  // had a repeat; next seed
        found = true;
        CHECK(a.train.size() == 8);  // 4 distinct draws per class
        CHECK(a.test.size() == 2);   // the remaining 20%
        CHECK(count_prefix(a.test, "neg") == 1);
        CHECK(count_prefix(a.test, "pos") == 1);
    }
    CHECK(found);
}

TEST_CASE("bootstrap test fraction matches the analytic inclusion probability") {
    const auto patients = cohort(40, 40);
    // P(a given patient is never drawn in 32 draws of 40) = (39/40)^32.
    const double analytic = std::pow(39.0 / 40.0, 32.0);
    const std::size_t n_seeds = 1000;
    std::vector<double> fractions(n_seeds);
    for (std::size_t s = 0; s < n_seeds; ++s) {
        const auto plan = bootstrap_split(patients, 0.8, 1000 + s);
        fractions[s] =
            static_cast<double>(plan.assignments[0].test.size()) / 80.0;
    }
    double mean = 0.0;
    for (double f : fractions) mean += f;
    mean /= static_cast<double>(n_seeds);
    double var = 0.0;
    for (double f : fractions) var += (f - mean) * (f - mean);
    var /= static_cast<double>(n_seeds - 1);
    const double se = std::sqrt(var / static_cast<double>(n_seeds));
    CHECK(std::abs(mean - analytic) <= 3.0 * se);
}

TEST_CASE("bootstrap rejects classes too small to draw from") {
    CHECK_THROWS_AS(bootstrap_split(cohort(1, 5), 0.8, 1), EmptySide);
    CHECK_THROWS_AS(bootstrap_split(cohort(5, 1), 0.8, 1), EmptySide);
    CHECK_THROWS_AS(bootstrap_split(cohort(5, 5), 1.0, 1), ConfigInvalid);
}

TEST_CASE("oversampling balances by appending minority copies") {
    std::vector<BreathInstance> instances;
    for (std::size_t i = 0; i < 100; ++i) {
        instances.push_back(stub_instance("pos" + std::to_string(i % 10), Label::Ards, i));
    }
    for (std::size_t i = 0; i < 50; ++i) {
        instances.push_back(
            stub_instance("neg" + std::to_string(i % 5), Label::NonArds, 1000 + i));
    }
    const auto out = oversample_instances(instances, 457);
    REQUIRE(out.size() == 200);
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& inst : out) (inst.label == Label::Ards ? n_pos : n_neg)++;
    CHECK(n_pos == 100);
    CHECK(n_neg == 100);
    // The input survives untouched as a prefix.
    for (std::size_t i = 0; i < instances.size(); ++i) {
        CHECK(out[i].start_index == instances[i].start_index);
    }
    // Every appended copy is one of the original minority instances.
    for (std::size_t i = instances.size(); i < out.size(); ++i) {
        CHECK(out[i].label == Label::NonArds);
        CHECK(out[i].start_index >= 1000);
        CHECK(out[i].start_index < 1050);
    }
}

TEST_CASE("oversampling a balanced set changes nothing") {
    std::vector<BreathInstance> instances;
    for (std::size_t i = 0; i < 6; ++i) {
        instances.push_back(
            stub_instance("p" + std::to_string(i), i < 3 ? Label::Ards : Label::NonArds, i));
    }
    const auto out = oversample_instances(instances, 461);
    REQUIRE(out.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) CHECK(out[i].start_index == i);
}

TEST_CASE("oversampling keeps every original in the balanced multiset") {
    std::vector<BreathInstance> instances;
    for (std::size_t i = 0; i < 7; ++i) instances.push_back(stub_instance("a", Label::Ards, i));
    for (std::size_t i = 0; i < 3; ++i) {
        instances.push_back(stub_instance("b", Label::NonArds, 100 + i));
    }
    const auto out = oversample_instances(instances, 463);
    REQUIRE(out.size() == 14);
    std::multiset<std::size_t> minority;
    for (const auto& inst : out) {
        if (inst.label == Label::NonArds) minority.insert(inst.start_index);
    }
    REQUIRE(minority.size() == 7);
    for (std::size_t i = 0; i < 3; ++i) CHECK(minority.count(100 + i) >= 1);
    for (std::size_t v : minority) CHECK((v >= 100 && v < 103));

    const auto again = oversample_instances(instances, 463);
    for (std::size_t i = 0; i < out.size(); ++i) {
        CHECK(out[i].start_index == again[i].start_index);
    }
}

TEST_CASE("oversampling needs both classes") {
    std::vector<BreathInstance> only;
    only.push_back(stub_instance("a", Label::Ards, 0));
    CHECK_THROWS_AS(oversample_instances(only, 1), SingleClass);
    CHECK_THROWS_AS(oversample_instances({}, 1), SingleClass);
}
