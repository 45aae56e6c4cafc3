#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mbwish/mb_wish.hpp"

namespace mbwish {

/// Report as JSON. Zero values have log null. Wall time lives under "timing" only.
nlohmann::json report_to_json(const EstimateReport& report);

/// The report minus its "timing" member, serialized; equal strings mean identical runs.
std::string canonical_report(const nlohmann::json& report);

struct VerifyResult {
    bool ok = true;
    std::vector<std::string> problems;
};

/// Recomputes each M_i as the lower median of its level and the combined estimate
/// from the stored M, requiring bit-for-bit agreement with the stored values.
VerifyResult verify_report(const nlohmann::json& report);

/// -inf is written as null.
nlohmann::json log_to_json(double v);
double log_from_json(const nlohmann::json& j);

}  // namespace mbwish
