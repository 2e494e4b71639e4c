// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace vprompt::metrics {

/// Porter stemmer (reference C implementation rules, including bli->ble and
/// logi->log). Lowercases first; tokens with non-letters and words of at most
/// two letters are returned lowercased and otherwise unchanged.
std::string porter_stem(std::string_view word);

}  // namespace vprompt::metrics
