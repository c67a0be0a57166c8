#pragma once

#include "rpolab/aggregate.hpp"
#include "rpolab/dataset.hpp"
#include "rpolab/grid.hpp"
#include "rpolab/instance.hpp"
#include "rpolab/reward.hpp"
#include "rpolab/rng.hpp"

namespace rpolab {

// Probability that a1 beats a0 under reward table r:
// sigmoid(r(x,a1) - r(x,a0)).
double bt_prob(const RewardTable& r, int x, int a1, int a0);

// Bernoulli label with success probability bt_prob(r, x, a1, a0).
int sample_label(const RewardTable& r, int x, int a1, int a0, SplitMix64& rng);

// Draw n comparisons from the instance's behavior spec with labels from the
// true reward.  Identical (instance, n, rng state) reproduce the dataset
// bit-for-bit.
PreferenceDataset generate_dataset(const BanditInstance& inst, int n, SplitMix64& rng);

// Average negative log-likelihood of the labels under reward table r.
double mle_loss(const RewardTable& r, const PreferenceDataset& data);
double mle_loss(const RewardTable& r, const AggregatedData& data);

// Gradient of mle_loss with respect to every table entry.
Grid mle_gradient(const RewardTable& r, const PreferenceDataset& data);
Grid mle_gradient(const RewardTable& r, const AggregatedData& data);

// Total variation distance between the two label laws at (x, a1, a0):
// |sigmoid(d1) - sigmoid(d2)| for the two reward differences.
double tv_bt(const RewardTable& r1, const RewardTable& r2, int x, int a1, int a0);

// Squared Hellinger distance between the two label laws at (x, a1, a0),
// the direct two-outcome sum (sqrt p - sqrt q)^2 + (sqrt(1-p) - sqrt(1-q))^2.
double hellinger_sq_bt(const RewardTable& r1, const RewardTable& r2, int x, int a1, int a0);

// Smallest slope of the logistic function on [-bound, bound]:
// 1 / (1 + e^bound)^2.  Lower bounds |sigmoid(z1)-sigmoid(z2)| / |z1-z2|
// for arguments in that interval.
double sigmoid_kappa(double bound);

}  // namespace rpolab
