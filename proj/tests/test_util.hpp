#pragma once

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ponzilens/chain.hpp"
#include "ponzilens/features.hpp"
#include "ponzilens/rng.hpp"

namespace test_util {

inline std::filesystem::path data_dir() { return PONZI_LENS_TEST_DATA_DIR; }

inline std::filesystem::path fresh_temp_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("ponzilens_" + tag + "_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline ponzilens::AddressId make_address(unsigned index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "0x%040x", index + 1);
  return ponzilens::AddressId::parse(buf);
}

// Random but always valid history: sorted timestamps, creator distinct from
// the contract, counterparties drawn from a small pool (creator included so
// initiator paths get exercised), frequent zero values and timestamp ties.
inline ponzilens::ContractHistory random_history(ponzilens::Rng& rng, unsigned tag,
                                                 std::size_t max_txs = 30) {
  using namespace ponzilens;
  ContractHistory h;
  h.address = make_address(1000000 + tag);
  h.creator = make_address(2000000 + tag);
  h.label = rng.below(2) == 0 ? Label::NotPonzi : Label::Ponzi;

  const std::size_t n = rng.below(max_txs + 1);
  std::vector<AddressId> pool;
  for (unsigned i = 0; i < 5; ++i) pool.push_back(make_address(3000000 + 8 * tag + i));
  pool.push_back(h.creator);

  for (std::size_t i = 0; i < n; ++i) {
    Transaction tx;
    tx.timestamp = static_cast<std::int64_t>(rng.below(400000));
    tx.direction = rng.below(2) == 0 ? Direction::In : Direction::Out;
    tx.counterparty = pool[rng.below(pool.size())];
    tx.value = rng.below(4) == 0 ? Wei{0} : Wei{rng.below(50)} * Wei{100000000000000000ULL};
    h.transactions.push_back(tx);
  }
  std::stable_sort(h.transactions.begin(), h.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  return h;
}

// Feature matrix filled with uniform noise; labels from a caller-provided rule.
template <typename LabelRule>
ponzilens::FeatureMatrix random_matrix(ponzilens::Rng& rng, std::size_t rows, std::size_t cols,
                                       LabelRule&& rule) {
  ponzilens::FeatureMatrix m;
  for (std::size_t c = 0; c < cols; ++c) m.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t r = 0; r < rows; ++r) {
    m.addresses.push_back(test_util::make_address(4000000 + static_cast<unsigned>(r)).str());
    std::vector<double> row(cols);
    for (std::size_t c = 0; c < cols; ++c) row[c] = rng.uniform01();
    m.values.insert(m.values.end(), row.begin(), row.end());
    m.labels.push_back(rule(row) ? 1 : 0);
  }
  return m;
}

}  // namespace test_util
