#include "hagcn/architecture.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace hagcn {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::vector<LayerDesc> parse_all() {
    auto layers = parse_sequence();
    skip_spaces();
    if (pos_ != text_.size()) throw ParseError("unexpected character '" + std::string(1, text_[pos_]) + "'", pos_);
    if (layers.empty()) throw ParseError("empty architecture", 0);
    return layers;
  }

 private:
  std::vector<LayerDesc> parse_sequence() {
    std::vector<LayerDesc> out;
    while (true) {
      skip_spaces();
      auto item = parse_item();
      out.insert(out.end(), item.begin(), item.end());
      skip_spaces();
      if (pos_ < text_.size() && text_[pos_] == '-') {
        ++pos_;
        continue;
      }
      return out;
    }
  }

  std::vector<LayerDesc> parse_item() {
    if (pos_ < text_.size() && text_[pos_] == '[') {
      const std::size_t open = pos_++;
      auto inner = parse_sequence();
      skip_spaces();
      if (pos_ >= text_.size() || text_[pos_] != ']') throw ParseError("unclosed '['", open);
      ++pos_;
      skip_spaces();
      if (pos_ >= text_.size() || text_[pos_] != '*') throw ParseError("expected '*<count>' after ']'", pos_);
      ++pos_;
      const std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      int count = 0;
      if (!parse_int(text_.substr(start, pos_ - start), count) || count < 1) {
        throw ParseError("malformed repetition count", start);
      }
      std::vector<LayerDesc> out;
      for (int r = 0; r < count; ++r) out.insert(out.end(), inner.begin(), inner.end());
      return out;
    }
    const std::size_t start = pos_;
    int depth = 0;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '{') ++depth;
      if (c == '}') --depth;
      if (depth == 0 && (c == '-' || c == ']' || c == ' ')) break;
      ++pos_;
    }
    return {parse_token(text_.substr(start, pos_ - start), start)};
  }

  static LayerDesc parse_token(std::string_view token, std::size_t at) {
    if (token.empty()) throw ParseError("empty layer token", at);
    const std::string t = lower(token);
    if (t == "relu") return ReluDesc{};
    if (t == "softmax") return SoftmaxDesc{};
    if (t == "dconv") return DconvDesc{};
    if (t.rfind("fc", 0) == 0) {
      int width = 0;
      if (!parse_int(std::string_view(t).substr(2), width) || width < 1) {
        throw ParseError("malformed fully-connected width in '" + std::string(token) + "'", at);
      }
      return FcDesc{width};
    }

    std::string_view rest(t);
    GconvDesc desc;
    std::size_t offset = 0;
    if (rest.rfind("adp_", 0) == 0) {
      desc.adaptive = true;
      rest.remove_prefix(4);
      offset += 4;
    }
    if (rest.rfind("gcn", 0) != 0) throw ParseError("unknown layer token '" + std::string(token) + "'", at);
    rest.remove_prefix(3);
    offset += 3;
    if (!rest.empty() && rest.front() == '_') {
      rest.remove_prefix(1);
      ++offset;
    }
    if (rest.size() < 2 || rest.front() != '{' || rest.back() != '}') {
      throw ParseError("malformed order set in '" + std::string(token) + "'", at + offset);
    }
    std::string_view body = rest.substr(1, rest.size() - 2);
    std::set<int> seen;
    while (true) {
      const auto comma = body.find(',');
      std::string_view item = body.substr(0, comma);
      while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
      while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
      int k = 0;
      if (!parse_int(item, k) || k < 1 || !seen.insert(k).second) {
        throw ParseError("malformed order set in '" + std::string(token) + "'", at + offset);
      }
      desc.orders.push_back(k);
      if (comma == std::string_view::npos) break;
      body.remove_prefix(comma + 1);
    }
    std::sort(desc.orders.begin(), desc.orders.end());
    return desc;
  }

  void skip_spaces() {
    while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

struct TokenWriter {
  std::string operator()(const GconvDesc& g) const {
    std::string s = g.adaptive ? "adp_gcn_{" : "gcn_{";
    for (std::size_t i = 0; i < g.orders.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(g.orders[i]);
    }
    return s + "}";
  }
  std::string operator()(const FcDesc& f) const { return "fc" + std::to_string(f.width); }
  std::string operator()(const ReluDesc&) const { return "ReLU"; }
  std::string operator()(const SoftmaxDesc&) const { return "softmax"; }
  std::string operator()(const DconvDesc&) const { return "dconv"; }
};

}  // namespace

ArchitectureSpec parse_architecture(std::string_view text) { return ArchitectureSpec{Parser(text).parse_all()}; }

std::string to_string(const LayerDesc& layer) { return std::visit(TokenWriter{}, layer); }

std::string to_string(const ArchitectureSpec& spec) {
  std::string out;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (i) out += "-";
    out += to_string(spec.layers[i]);
  }
  return out;
}

}  // namespace hagcn
