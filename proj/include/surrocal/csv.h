#pragma once

#include <string>
#include <vector>

namespace surrocal {

// 17 significant digits, '.' decimal point regardless of locale; "inf", "-inf", "nan".
std::string format_double(double x);
double parse_double(const std::string& s);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace surrocal
