#pragma once

#include "ards/flow.hpp"
#include "ards/segmentation.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ards {

// A patient as the unit of splitting.  Every window of a patient lands on
// exactly one side of each assignment, so no recording leaks across sides.
struct PatientRef {
    std::string patient_id;
    Label label = Label::NonArds;
};

enum class SplitScheme { KFold, RandomKFold, Holdout, Bootstrap };

std::string split_scheme_name(SplitScheme scheme);
SplitScheme split_scheme_from_name(const std::string& name);  // throws ParseError

// One train/test assignment.  `train` may repeat a patient id: bootstrap
// draws with replacement and the duplicates are kept as extra training data.
struct SplitAssignment {
    std::vector<std::string> train;
    std::vector<std::string> test;
};

struct SplitPlan {
    SplitScheme scheme = SplitScheme::KFold;
    std::vector<SplitAssignment> assignments;  // one per fold, or one holdout
    std::size_t k = 0;             // fold count when scheme is a k-fold
    double train_fraction = 0.0;   // holdout / bootstrap
    std::uint64_t seed = 0;
};

// Class-stratified K-fold.  Each class is shuffled once, cut into k equal
// chunks, and fold f tests on chunk f of both classes, so every fold's test
// side holds exactly count/k patients per class and the test sides tile the
// cohort.  Requires k >= 2 (ConfigInvalid), both classes present
// (SingleClass), unique ids (DuplicatePatient), and per-class counts
// divisible by k (UnbalancedCohort).
SplitPlan stratified_kfold(const std::vector<PatientRef>& patients, std::size_t k,
                           std::uint64_t seed);

// Class-stratified random holdout: round(train_fraction * count) patients of
// each class train, the rest test.  Throws ConfigInvalid unless
// 0 < train_fraction < 1, and EmptySide when either side of either class
// rounds to zero patients.
SplitPlan holdout_split(const std::vector<PatientRef>& patients, double train_fraction,
                        std::uint64_t seed);

// Class-stratified bootstrap: floor(train_fraction * count) draws with
// replacement per class form the training side (duplicates retained); the
// test side is every patient never drawn.  floor with train_fraction < 1
// always leaves at least one patient undrawn per class, but a class small
// enough to get zero draws raises EmptySide.
SplitPlan bootstrap_split(const std::vector<PatientRef>& patients, double train_fraction,
                          std::uint64_t seed);

// Balance a training set by appending uniformly re-drawn copies of minority
// instances until the class counts match.  The input order is preserved as a
// prefix, so every original instance survives.  Throws SingleClass unless
// both classes are present.
std::vector<BreathInstance> oversample_instances(
    const std::vector<BreathInstance>& instances, std::uint64_t seed);

}  // namespace ards
