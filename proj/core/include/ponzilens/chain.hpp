#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ponzilens {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ethereum account identifier, normalized to lowercase "0x" + 40 hex digits.
// Two ids are equal iff their normalized strings are equal.
class AddressId {
 public:
  AddressId() = default;

  static AddressId parse(std::string_view text);  // throws Error on bad input
  static std::optional<AddressId> try_parse(std::string_view text);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend bool operator==(const AddressId&, const AddressId&) = default;
  friend std::strong_ordering operator<=>(const AddressId&, const AddressId&) = default;

 private:
  std::string value_;
};

// Wei amounts exceed 64 bits in the wild (1 ETH = 1e18 wei), so keep them in
// a 128-bit integer and convert to ETH only at feature time.
using Wei = unsigned __int128;

Wei parse_wei(std::string_view text);  // base-10; throws on garbage/overflow
std::string format_wei(Wei value);
double wei_to_eth(Wei value);

enum class Direction { In, Out };  // In: value/message sent to the contract

struct Transaction {
  std::int64_t timestamp = 0;  // unix seconds, >= 0
  AddressId counterparty;
  Direction direction = Direction::In;
  Wei value = 0;

  bool operator==(const Transaction&) const = default;
};

enum class Label : int { NotPonzi = 0, Ponzi = 1 };

struct ContractHistory {
  AddressId address;
  AddressId creator;  // filled in from the labels file
  std::vector<Transaction> transactions;  // ascending timestamp, file order on ties
  std::optional<Label> label;
};

struct LabeledDataset {
  std::vector<ContractHistory> contracts;  // all labelled, label-file order
  std::size_t n_ponzi = 0;
  std::size_t n_not_ponzi = 0;
  std::size_t n_unlabeled_dropped = 0;  // histories with no label row
};

using HistoryMap = std::map<AddressId, ContractHistory>;

// transactions.csv: `contract,timestamp,from,to,value_wei`. Direction is
// resolved against the contract column; a row whose contract matches neither
// endpoint is rejected with its line number. An optional sixth provenance
// column is accepted and ignored.
HistoryMap load_transactions(const std::string& path);

// labels.csv: `address,creator,label` with label 0 = not-Ponzi, 1 = Ponzi.
// Every label row must reference a loaded history; histories without a label
// are dropped and counted in n_unlabeled_dropped.
LabeledDataset load_labels(const std::string& path, const HistoryMap& histories);

void save_transactions(const std::string& path, const HistoryMap& histories);
void save_labels(const std::string& path, const LabeledDataset& dataset);

}  // namespace ponzilens
