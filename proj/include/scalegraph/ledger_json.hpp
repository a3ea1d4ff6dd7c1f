#pragma once

#include <json.hpp>

#include "scalegraph/ledger.hpp"

namespace scalegraph::ledger {

nlohmann::ordered_json to_json(const Transaction& tx, const IdSpace& space);
nlohmann::ordered_json to_json(const Block& block, const IdSpace& space);
Transaction transaction_from_json(const nlohmann::ordered_json& j, const IdSpace& space);
Block block_from_json(const nlohmann::ordered_json& j, const IdSpace& space);

}  // namespace scalegraph::ledger
