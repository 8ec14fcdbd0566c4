#pragma once

// 5-field rules, ClassBench filter parsing, synthetic rulesets and traces,
// plus the linear-scan reference classifier.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mbtc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline constexpr std::size_t kNumFields = 5;

enum Field : std::size_t { kSrcIp = 0, kDstIp = 1, kSrcPort = 2, kDstPort = 3, kProto = 4 };

inline constexpr std::array<unsigned, kNumFields> kFieldWidth{32, 32, 16, 16, 8};
inline constexpr std::array<const char*, kNumFields> kFieldName{"src_ip", "dst_ip", "src_port",
                                                                 "dst_port", "proto"};

inline constexpr std::uint64_t field_span(std::size_t dim) { return std::uint64_t{1} << kFieldWidth[dim]; }

// Half-open [lo, hi).
struct FieldRange {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  std::uint64_t width() const noexcept { return hi - lo; }
  bool contains(std::uint64_t v) const noexcept { return v >= lo && v < hi; }
  bool intersects(const FieldRange& o) const noexcept { return lo < o.hi && o.lo < hi; }
  bool covers(const FieldRange& o) const noexcept { return lo <= o.lo && o.hi <= hi; }
  bool valid_for(std::size_t dim) const noexcept { return lo < hi && hi <= field_span(dim); }

  static FieldRange full(std::size_t dim) { return {0, field_span(dim)}; }
  static FieldRange exact(std::uint64_t v) { return {v, v + 1}; }

  static FieldRange from_prefix(std::size_t dim, std::uint64_t value, unsigned len) {
    const unsigned w = kFieldWidth[dim];
    if (len > w) throw Error("prefix length " + std::to_string(len) + " exceeds field width");
    const std::uint64_t size = std::uint64_t{1} << (w - len);
    const std::uint64_t lo = value & ~(size - 1) & (field_span(dim) - 1);
    return {lo, lo + size};
  }

  // Prefix length if the range is an aligned power-of-two block.
  std::optional<unsigned> prefix_len(std::size_t dim) const {
    const std::uint64_t w = width();
    if (w == 0 || (w & (w - 1)) != 0 || lo % w != 0) return std::nullopt;
    unsigned bits = 0;
    while ((std::uint64_t{1} << bits) < w) ++bits;
    return kFieldWidth[dim] - bits;
  }

  friend bool operator==(const FieldRange&, const FieldRange&) = default;
};

using Box = std::array<FieldRange, kNumFields>;

inline Box full_box() {
  Box b;
  for (std::size_t d = 0; d < kNumFields; ++d) b[d] = FieldRange::full(d);
  return b;
}

inline bool boxes_intersect(const Box& a, const Box& b) {
  for (std::size_t d = 0; d < kNumFields; ++d)
    if (!a[d].intersects(b[d])) return false;
  return true;
}

struct PacketHeader {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;

  std::uint64_t field(std::size_t dim) const noexcept {
    switch (dim) {
      case kSrcIp: return src_ip;
      case kDstIp: return dst_ip;
      case kSrcPort: return src_port;
      case kDstPort: return dst_port;
      default: return proto;
    }
  }

  static PacketHeader from_fields(const std::array<std::uint64_t, kNumFields>& f) {
    for (std::size_t d = 0; d < kNumFields; ++d)
      if (f[d] >= field_span(d)) throw Error(std::string("header field ") + kFieldName[d] + " out of range");
    return {static_cast<std::uint32_t>(f[0]), static_cast<std::uint32_t>(f[1]),
            static_cast<std::uint16_t>(f[2]), static_cast<std::uint16_t>(f[3]),
            static_cast<std::uint8_t>(f[4])};
  }

  friend bool operator==(const PacketHeader&, const PacketHeader&) = default;
};

inline bool in_box(const Box& box, const PacketHeader& h) {
  for (std::size_t d = 0; d < kNumFields; ++d)
    if (!box[d].contains(h.field(d))) return false;
  return true;
}

struct Rule {
  int id = 0;
  Box ranges{};

  int priority() const noexcept { return id; }
  friend bool operator==(const Rule&, const Rule&) = default;
};

struct Ruleset {
  std::vector<Rule> rules;

  std::size_t size() const noexcept { return rules.size(); }
  const Rule& operator[](std::size_t i) const { return rules[i]; }

  // Throws unless non-empty with dense ids and valid ranges.
  void validate() const {
    if (rules.empty()) throw Error("empty ruleset");
    for (std::size_t i = 0; i < rules.size(); ++i) {
      if (rules[i].id != static_cast<int>(i)) throw Error("rule ids must be dense 0..n-1");
      for (std::size_t d = 0; d < kNumFields; ++d)
        if (!rules[i].ranges[d].valid_for(d))
          throw Error("rule " + std::to_string(i) + ": invalid range on " + kFieldName[d]);
    }
  }
};

inline bool rule_matches(const Rule& rule, const PacketHeader& h) noexcept {
  return in_box(rule.ranges, h);
}

// Ground truth: lowest matching id.
inline std::optional<int> oracle_classify(const Ruleset& rs, const PacketHeader& h) {
  for (const Rule& r : rs.rules)
    if (rule_matches(r, h)) return r.id;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ClassBench filter format

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s, int base = 10) {
  if (s.empty()) return std::nullopt;
  if (base == 16) {
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) s.remove_prefix(2);
    else return std::nullopt;
  }
  std::uint64_t v = 0;
  for (char c : s) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (base == 16 && c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else if (base == 16 && c >= 'A' && c <= 'F') digit = c - 'A' + 10;
    else return std::nullopt;
    if (v > (UINT64_MAX - digit) / base) return std::nullopt;
    v = v * base + digit;
  }
  return v;
}

inline std::optional<std::uint64_t> parse_dotted_quad(std::string_view ip) {
  std::uint64_t value = 0;
  for (int octet = 0; octet < 4; ++octet) {
    const auto dot = ip.find('.');
    if ((dot == std::string_view::npos) != (octet == 3)) return std::nullopt;
    const auto part = parse_uint(ip.substr(0, dot));
    if (!part || *part > 255) return std::nullopt;
    value = (value << 8) | *part;
    if (dot != std::string_view::npos) ip.remove_prefix(dot + 1);
  }
  return value;
}

inline FieldRange parse_ip_prefix(std::string_view tok, std::size_t dim, std::size_t line) {
  const auto slash = tok.find('/');
  if (slash == std::string_view::npos) throw ParseError(line, "expected ip/len, got '" + std::string(tok) + "'");
  std::string_view ip = tok.substr(0, slash);
  const auto len = parse_uint(tok.substr(slash + 1));
  if (!len) throw ParseError(line, "bad prefix length in '" + std::string(tok) + "'");
  if (*len > kFieldWidth[dim]) throw ParseError(line, "prefix length " + std::to_string(*len) + " exceeds 32");
  const auto value = parse_dotted_quad(ip);
  if (!value) throw ParseError(line, "bad address '" + std::string(tok) + "'");
  return FieldRange::from_prefix(dim, *value, static_cast<unsigned>(*len));
}

inline FieldRange parse_port_range(std::string_view lo_tok, std::string_view hi_tok, std::size_t line) {
  const auto lo = parse_uint(lo_tok);
  const auto hi = parse_uint(hi_tok);
  if (!lo || !hi || *lo > 65535 || *hi > 65535 || *lo > *hi)
    throw ParseError(line, "bad port range '" + std::string(lo_tok) + " : " + std::string(hi_tok) + "'");
  return {*lo, *hi + 1};
}

inline FieldRange parse_proto(std::string_view tok, std::size_t line) {
  const auto slash = tok.find('/');
  if (slash == std::string_view::npos) throw ParseError(line, "expected proto/mask");
  const auto value = parse_uint(tok.substr(0, slash), 16);
  const auto mask = parse_uint(tok.substr(slash + 1), 16);
  if (!value || !mask || *value > 0xFF) throw ParseError(line, "bad protocol '" + std::string(tok) + "'");
  if (*mask == 0x00) return FieldRange::full(kProto);
  if (*mask == 0xFF) return FieldRange::exact(*value);
  throw ParseError(line, "unsupported protocol mask '" + std::string(tok) + "'");
}

inline std::string format_ip(std::uint64_t v) {
  return std::to_string((v >> 24) & 0xFF) + "." + std::to_string((v >> 16) & 0xFF) + "." +
         std::to_string((v >> 8) & 0xFF) + "." + std::to_string(v & 0xFF);
}

inline std::string hex2(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  return std::string("0x") + kDigits[(v >> 4) & 0xF] + kDigits[v & 0xF];
}

}  // namespace detail

// One rule per non-empty line:
//   @sip/len dip/len splo : sphi dplo : dphi proto/mask [flags]
// A trailing ClassBench flags token (hex/hex) is accepted and ignored.
inline Ruleset parse_classbench(std::string_view text) {
  Ruleset rs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    auto toks = detail::split_ws(line);
    if (toks.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    if (toks[0].empty() || toks[0][0] != '@') throw ParseError(line_no, "rule must start with '@'");
    toks[0].remove_prefix(1);
    if (toks[0].empty()) toks.erase(toks.begin());
    if (toks.size() != 9 && toks.size() != 10) throw ParseError(line_no, "malformed rule line");
    if (toks[3] != ":" || toks[6] != ":") throw ParseError(line_no, "malformed port range separator");
    Rule r;
    r.id = static_cast<int>(rs.rules.size());
    r.ranges[kSrcIp] = detail::parse_ip_prefix(toks[0], kSrcIp, line_no);
    r.ranges[kDstIp] = detail::parse_ip_prefix(toks[1], kDstIp, line_no);
    r.ranges[kSrcPort] = detail::parse_port_range(toks[2], toks[4], line_no);
    r.ranges[kDstPort] = detail::parse_port_range(toks[5], toks[7], line_no);
    r.ranges[kProto] = detail::parse_proto(toks[8], line_no);
    rs.rules.push_back(r);
    if (eol == text.size()) break;
  }
  if (rs.rules.empty()) throw ParseError(0, "empty ruleset");
  return rs;
}

inline std::string format_classbench_rule(const Rule& r) {
  std::string out = "@";
  for (std::size_t d : {kSrcIp, kDstIp}) {
    const auto len = r.ranges[d].prefix_len(d);
    if (!len) throw Error("rule " + std::to_string(r.id) + ": address range is not a prefix");
    out += detail::format_ip(r.ranges[d].lo) + "/" + std::to_string(*len) + (d == kSrcIp ? " " : "\t");
  }
  out += std::to_string(r.ranges[kSrcPort].lo) + " : " + std::to_string(r.ranges[kSrcPort].hi - 1) + "\t";
  out += std::to_string(r.ranges[kDstPort].lo) + " : " + std::to_string(r.ranges[kDstPort].hi - 1) + "\t";
  const FieldRange& p = r.ranges[kProto];
  if (p == FieldRange::full(kProto)) out += "0x00/0x00";
  else if (p.width() == 1) out += detail::hex2(p.lo) + "/0xFF";
  else throw Error("rule " + std::to_string(r.id) + ": protocol range is neither exact nor wildcard");
  return out;
}

inline std::string serialize_classbench(const Ruleset& rs) {
  std::string out;
  for (const Rule& r : rs.rules) out += format_classbench_rule(r) + "\n";
  return out;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

inline Ruleset load_classbench(const std::string& path) { return parse_classbench(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Synthetic rulesets

enum class Profile { acl_like, ipc_like };

inline Profile parse_profile(std::string_view s) {
  if (s == "acl" || s == "acl-like") return Profile::acl_like;
  if (s == "ipc" || s == "ipc-like") return Profile::ipc_like;
  throw Error("unknown profile '" + std::string(s) + "'");
}

namespace detail {

struct ProfileMix {
  double src_wild, dst_wild;       // probability of a /0 address
  double src_host, dst_host;       // probability of a /32 given non-wildcard
  double sport_wild, sport_range;  // else exact
  double dport_wild, dport_range;  // else exact
  double proto_wild, proto_udp;    // else tcp (a small remainder picks icmp/other)
  int src_networks, dst_networks;  // size of the address pools rules cluster around
};

inline ProfileMix mix_for(Profile p) {
  if (p == Profile::acl_like) return {0.10, 0.05, 0.35, 0.55, 0.90, 0.07, 0.25, 0.20, 0.15, 0.25, 24, 40};
  return {0.08, 0.06, 0.40, 0.40, 0.55, 0.20, 0.35, 0.15, 0.35, 0.30, 32, 32};
}

inline constexpr std::array<std::uint64_t, 16> kWellKnownPorts{20,  21,  22,  23,   25,   53,   69,   80,
                                                              110, 123, 143, 161, 443, 993, 1521, 3306};

}  // namespace detail

inline Ruleset generate_ruleset(std::uint64_t seed, std::size_t count, Profile profile) {
  if (count == 0) throw Error("rule count must be at least 1");
  const detail::ProfileMix mix = detail::mix_for(profile);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi_incl) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi_incl)(rng);
  };

  auto make_pool = [&](int n) {
    std::vector<std::uint64_t> pool(n);
    for (auto& net : pool) net = uniform(0, 0xFFFFFFFFull) & 0xFFFF0000ull;
    return pool;
  };
  const auto src_pool = make_pool(mix.src_networks);
  const auto dst_pool = make_pool(mix.dst_networks);

  auto address = [&](std::size_t dim, const std::vector<std::uint64_t>& pool, double wild, double host) {
    if (coin(rng) < wild) return FieldRange::full(dim);
    const std::uint64_t base = pool[uniform(0, pool.size() - 1)] | uniform(0, 0xFFFF);
    unsigned len;
    const double c = coin(rng);
    if (c < host) len = 32;
    else if (c < host + (1.0 - host) * 0.6) len = 24;
    else if (c < host + (1.0 - host) * 0.9) len = 16;
    else len = static_cast<unsigned>(uniform(8, 15));
    return FieldRange::from_prefix(dim, base, len);
  };
  auto port = [&](double wild, double range) {
    const double c = coin(rng);
    if (c < wild) return FieldRange::full(kSrcPort);
    if (c < wild + range) {
      if (coin(rng) < 0.5) return FieldRange{1024, 65536};
      const std::uint64_t lo = uniform(0, 65000);
      return FieldRange{lo, lo + uniform(1, 512)};
    }
    if (coin(rng) < 0.7) return FieldRange::exact(detail::kWellKnownPorts[uniform(0, 15)]);
    return FieldRange::exact(uniform(1024, 65535));
  };

  Ruleset rs;
  rs.rules.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rule r;
    r.id = static_cast<int>(i);
    r.ranges[kSrcIp] = address(kSrcIp, src_pool, mix.src_wild, mix.src_host);
    r.ranges[kDstIp] = address(kDstIp, dst_pool, mix.dst_wild, mix.dst_host);
    r.ranges[kSrcPort] = port(mix.sport_wild, mix.sport_range);
    r.ranges[kDstPort] = port(mix.dport_wild, mix.dport_range);
    const double c = coin(rng);
    if (c < mix.proto_wild) r.ranges[kProto] = FieldRange::full(kProto);
    else if (c < mix.proto_wild + mix.proto_udp) r.ranges[kProto] = FieldRange::exact(17);
    else if (c < 0.97) r.ranges[kProto] = FieldRange::exact(6);
    else r.ranges[kProto] = FieldRange::exact(coin(rng) < 0.5 ? 1 : 47);
    rs.rules.push_back(r);
  }
  return rs;
}

// ---------------------------------------------------------------------------
// Traces: sample a rule uniformly, then a header uniformly inside its box.

inline std::vector<PacketHeader> generate_trace(const Ruleset& rs, std::uint64_t seed, std::size_t count) {
  std::vector<PacketHeader> out;
  if (count == 0) return out;
  rs.validate();
  out.reserve(count);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const Rule& r = rs.rules[std::uniform_int_distribution<std::size_t>(0, rs.size() - 1)(rng)];
    std::array<std::uint64_t, kNumFields> f{};
    for (std::size_t d = 0; d < kNumFields; ++d)
      f[d] = std::uniform_int_distribution<std::uint64_t>(r.ranges[d].lo, r.ranges[d].hi - 1)(rng);
    out.push_back(PacketHeader::from_fields(f));
  }
  return out;
}

inline std::string format_header(const PacketHeader& h, char sep = ' ') {
  std::string out;
  for (std::size_t d = 0; d < kNumFields; ++d) {
    if (d) out += sep;
    out += std::to_string(h.field(d));
  }
  return out;
}

// Five decimal fields separated by whitespace or commas. Addresses may also
// be written as dotted quads.
inline PacketHeader parse_header(std::string_view s, std::size_t line = 0) {
  std::string norm(s);
  std::replace(norm.begin(), norm.end(), ',', ' ');
  const auto toks = detail::split_ws(norm);
  if (toks.size() != kNumFields) throw ParseError(line, "expected 5 header fields");
  std::array<std::uint64_t, kNumFields> f{};
  for (std::size_t d = 0; d < kNumFields; ++d) {
    const bool dotted = d <= kDstIp && toks[d].find('.') != std::string_view::npos;
    const auto v = dotted ? detail::parse_dotted_quad(toks[d]) : detail::parse_uint(toks[d]);
    if (!v || *v >= field_span(d)) throw ParseError(line, std::string("bad ") + kFieldName[d] + " value");
    f[d] = *v;
  }
  return PacketHeader::from_fields(f);
}

inline std::string serialize_trace(const std::vector<PacketHeader>& trace) {
  std::string out;
  for (const auto& h : trace) out += format_header(h) + "\n";
  return out;
}

inline std::vector<PacketHeader> parse_trace(std::string_view text) {
  std::vector<PacketHeader> out;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    ++line_no;
    const std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (detail::split_ws(line).empty()) continue;
    out.push_back(parse_header(line, line_no));
  }
  return out;
}

}  // namespace mbtc
