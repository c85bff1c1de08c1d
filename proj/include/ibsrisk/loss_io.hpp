#pragma once

#include <string>

#include <json.hpp>

#include "ibsrisk/loss.hpp"

namespace ibsrisk {

// Loss description file format:
//
//   {"kind": "mse" | "mae" | "interval" | "generalized_interval" |
//            "constant" | "piecewise_power",
//    "params": {"mu1": 3, "mu2": 3, "A1": 1, "A2": 1, "c": 1},
//    "segments": [{"lo": 0, "hi": 1 | "inf",
//                  "terms": [{"coef": 1, "power": 0}]}, ...],
//    "K": 0, "K_prime": 2, "xi": 1, "xi_prime": 1}
//
// Built-in kinds are rebuilt from params; piecewise_power from segments and
// the optional metadata. Callback losses cannot be written.

nlohmann::json loss_to_json(const LossSpec& loss);
/// Throws DomainError on schema violations.
LossSpec loss_from_json(const nlohmann::json& j);

/// Built-in name, path to a JSON file, or inline JSON text. Names take the
/// shape parameters from `params` (mu1, mu2, A1, A2, c).
LossSpec resolve_loss(const std::string& arg, const nlohmann::json& params = nlohmann::json::object());

}  // namespace ibsrisk
