#pragma once

#include <json.hpp>

#include "cuflinks/minid.hpp"

namespace cuflinks::minid::detail {

nlohmann::json record_json(const Minid& m);
Minid record_from(const nlohmann::json& j);
Checksum checksum_from(const nlohmann::json& j);
/// Throws ArgumentError.
void check_mint_request(const MintRequest& r);

}  // namespace cuflinks::minid::detail
