#include "ponzilens/chain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ponzilens/csv.hpp"

namespace ponzilens {

namespace {

[[noreturn]] void fail_at(const std::string& path, std::size_t line_no, const std::string& what) {
  throw Error(path + ":" + std::to_string(line_no) + ": " + what);
}

std::int64_t parse_timestamp(std::string_view text) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0) {
    throw Error("bad timestamp '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

AddressId AddressId::parse(std::string_view text) {
  auto parsed = try_parse(text);
  if (!parsed) throw Error("bad address '" + std::string(text) + "'");
  return *parsed;
}

std::optional<AddressId> AddressId::try_parse(std::string_view text) {
  if (text.size() != 42 || text[0] != '0' || (text[1] != 'x' && text[1] != 'X')) {
    return std::nullopt;
  }
  AddressId id;
  id.value_.reserve(42);
  id.value_ += "0x";
  for (char c : text.substr(2)) {
    if (c >= '0' && c <= '9') {
      id.value_ += c;
    } else if (c >= 'a' && c <= 'f') {
      id.value_ += c;
    } else if (c >= 'A' && c <= 'F') {
      id.value_ += static_cast<char>(c - 'A' + 'a');
    } else {
      return std::nullopt;
    }
  }
  return id;
}

Wei parse_wei(std::string_view text) {
  if (text.empty()) throw Error("bad wei value ''");
  Wei value = 0;
  constexpr Wei kMax = ~Wei{0};
  for (char c : text) {
    if (c < '0' || c > '9') throw Error("bad wei value '" + std::string(text) + "'");
    const unsigned digit = static_cast<unsigned>(c - '0');
    if (value > (kMax - digit) / 10) throw Error("wei value overflow '" + std::string(text) + "'");
    value = value * 10 + digit;
  }
  return value;
}

std::string format_wei(Wei value) {
  if (value == 0) return "0";
  std::string out;
  while (value > 0) {
    out += static_cast<char>('0' + static_cast<unsigned>(value % 10));
    value /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

double wei_to_eth(Wei value) {
  return static_cast<double>(value) / 1e18;
}

HistoryMap load_transactions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file, expected header");
  ++line_no;

  auto header = split_csv_line(line);
  const bool has_provenance = header.size() == 6;
  if ((header.size() != 5 && !has_provenance) || header[0] != "contract" ||
      header[1] != "timestamp" || header[2] != "from" || header[3] != "to" ||
      header[4] != "value_wei") {
    fail_at(path, line_no, "expected header contract,timestamp,from,to,value_wei");
  }

  HistoryMap histories;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail_at(path, line_no, "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
    }
    try {
      const AddressId contract = AddressId::parse(fields[0]);
      const std::int64_t timestamp = parse_timestamp(fields[1]);
      const AddressId from = AddressId::parse(fields[2]);
      const AddressId to = AddressId::parse(fields[3]);
      const Wei value = parse_wei(fields[4]);

      Transaction tx;
      tx.timestamp = timestamp;
      tx.value = value;
      if (to == contract) {
        tx.direction = Direction::In;
        tx.counterparty = from;
      } else if (from == contract) {
        tx.direction = Direction::Out;
        tx.counterparty = to;
      } else {
        throw Error("contract " + contract.str() + " is neither endpoint");
      }

      auto [it, inserted] = histories.try_emplace(contract);
      if (inserted) it->second.address = contract;
      it->second.transactions.push_back(std::move(tx));
    } catch (const Error& e) {
      fail_at(path, line_no, e.what());
    }
  }

  for (auto& [address, history] : histories) {
    std::stable_sort(history.transactions.begin(), history.transactions.end(),
                     [](const Transaction& a, const Transaction& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return histories;
}

LabeledDataset load_labels(const std::string& path, const HistoryMap& histories) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file, expected header");
  ++line_no;

  auto header = split_csv_line(line);
  if (header.size() != 3 || header[0] != "address" || header[1] != "creator" ||
      header[2] != "label") {
    fail_at(path, line_no, "expected header address,creator,label");
  }

  LabeledDataset dataset;
  std::set<AddressId> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      fail_at(path, line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    }
    try {
      const AddressId address = AddressId::parse(fields[0]);
      const AddressId creator = AddressId::parse(fields[1]);
      if (creator == address) {
        throw Error("creator must differ from contract address " + address.str());
      }
      if (!seen.insert(address).second) {
        throw Error("duplicate address " + address.str());
      }
      Label label;
      if (fields[2] == "0") {
        label = Label::NotPonzi;
      } else if (fields[2] == "1") {
        label = Label::Ponzi;
      } else {
        throw Error("unknown label token '" + std::string(fields[2]) + "', expected 0 or 1");
      }

      const auto it = histories.find(address);
      if (it == histories.end()) {
        throw Error("label references unknown address " + address.str());
      }

      ContractHistory contract = it->second;
      contract.creator = creator;
      contract.label = label;
      if (label == Label::Ponzi) {
        ++dataset.n_ponzi;
      } else {
        ++dataset.n_not_ponzi;
      }
      dataset.contracts.push_back(std::move(contract));
    } catch (const Error& e) {
      fail_at(path, line_no, e.what());
    }
  }

  dataset.n_unlabeled_dropped = histories.size() - dataset.contracts.size();
  return dataset;
}

void save_transactions(const std::string& path, const HistoryMap& histories) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "contract,timestamp,from,to,value_wei\n";
  for (const auto& [address, history] : histories) {
    for (const Transaction& tx : history.transactions) {
      const std::string& from =
          tx.direction == Direction::In ? tx.counterparty.str() : address.str();
      const std::string& to =
          tx.direction == Direction::In ? address.str() : tx.counterparty.str();
      out << address.str() << ',' << tx.timestamp << ',' << from << ',' << to << ','
          << format_wei(tx.value) << '\n';
    }
  }
  if (!out) throw Error("write failed for " + path);
}

void save_labels(const std::string& path, const LabeledDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "address,creator,label\n";
  for (const ContractHistory& contract : dataset.contracts) {
    out << contract.address.str() << ',' << contract.creator.str() << ','
        << (contract.label == Label::Ponzi ? '1' : '0') << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

}  // namespace ponzilens
