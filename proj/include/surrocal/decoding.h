#pragma once

#include <vector>

#include "surrocal/surrogates.h"

namespace surrocal {

// argmin_z <psi(z), t^-1(v)>. Throws when v has no preimage under the link.
std::size_t decode_generic(const Surrogate& s, const Vec& v);

// Task-specific decoder from a moment vector u; same answer and tie-break
// as oracle_prediction.
std::size_t decode_fast(const Task& task, const Vec& u);

// Min-cost perfect assignment; result[row] = column.
// Among optimal assignments the lexicographically smallest is returned.
std::vector<int> linear_assignment(const Mat& cost);
std::vector<int> assignment_by_enumeration(const Mat& cost);

}  // namespace surrocal
