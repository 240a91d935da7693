#pragma once

#include <array>

namespace kvc::testing {

// Per-group EER (%) of a reference 12-cell table, age bins in
// ascending order, male row then female row.
inline constexpr std::array<double, 6> kMaleEerPct = {6.04, 6.62, 6.27, 6.74, 7.01, 6.74};
inline constexpr std::array<double, 6> kFemaleEerPct = {6.38, 7.01, 6.78, 7.33, 7.47, 7.69};

// Independently computed over the 12 cells (population std in percent, and
// max / min), with exact rational arithmetic rounded once to double.
inline constexpr double kAllCellsStdPct = 0.47132791133137875;
inline constexpr double kAllCellsSer = 1.2731788079470199;

// Summary values quoted with the table.
inline constexpr double kPrintedStdPct = 0.27;
inline constexpr double kPrintedSer = 1.34;
inline constexpr double kMaleMeanPct = 6.57;
inline constexpr double kFemaleMeanPct = 7.11;

}  // namespace kvc::testing
