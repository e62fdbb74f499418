#include "veil/speclang.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace veil {

namespace {

std::set<int> buildParamSet(const std::vector<TemporalOp>& ops, std::size_t from) {
  if (from == ops.size()) return {};
  const auto& w = ops[from].window;
  auto inner = buildParamSet(ops, from + 1);
  if (inner.empty()) return {w.lo, w.hi};
  std::set<int> out;
  for (int p : inner) {
    out.insert(w.lo + p);
    out.insert(w.hi + p);
  }
  return out;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  SpecFormula parse() {
    std::vector<TemporalOp> ops;
    skipSpace();
    while (pos_ < text_.size() && (peek() == 'F' || peek() == 'G') && isOperatorStart()) {
      TemporalKind kind = peek() == 'F' ? TemporalKind::Eventually : TemporalKind::Always;
      std::size_t at = pos_;
      ++pos_;
      skipSpace();
      if (peek() != '[') fail(pos_, "expected '[' after temporal operator (one-sided and unbounded operators are not supported)");
      ++pos_;
      Interval iv;
      iv.lo = parseNat();
      expect(',');
      iv.hi = parseNat();
      expect(']');
      if (iv.lo > iv.hi) fail(at, fmt::format("malformed interval [{},{}]: lower bound exceeds upper bound", iv.lo, iv.hi));
      ops.push_back({kind, iv});
      skipSpace();
    }
    if (ops.size() > 2) fail(0, "unsupported nesting: at most two temporal operators are allowed");
    if (ops.size() == 2 && ops[0].kind == ops[1].kind)
      fail(0, "unsupported nesting: only F[..]G[..] and G[..]F[..] may be stacked");

    Literal lit;
    skipSpace();
    if (peek() == '!') {
      lit.negated = true;
      ++pos_;
      skipSpace();
    }
    lit.prop = parseIdent();
    skipSpace();
    if (pos_ != text_.size()) fail(pos_, fmt::format("unexpected trailing input '{}'", text_.substr(pos_)));
    return SpecFormula(std::move(ops), std::move(lit));
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  bool isOperatorStart() const {
    // "F" or "G" followed by '[' (possibly after spaces) is an operator; otherwise an identifier.
    std::size_t p = pos_ + 1;
    while (p < text_.size() && std::isspace(static_cast<unsigned char>(text_[p]))) ++p;
    if (p < text_.size() && text_[p] == '[') return true;
    if (pos_ + 1 < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_ + 1])) || text_[pos_ + 1] == '_'))
      return false;
    return true;
  }

  void skipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  void expect(char c) {
    skipSpace();
    if (peek() != c) fail(pos_, fmt::format("expected '{}'", c));
    ++pos_;
  }

  int parseNat() {
    skipSpace();
    std::size_t start = pos_;
    long long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > std::numeric_limits<int>::max() / 4) fail(start, "interval bound too large");
      ++pos_;
    }
    if (pos_ == start) fail(start, "expected a natural number");
    skipSpace();
    return static_cast<int>(v);
  }

  std::string parseIdent() {
    std::size_t start = pos_;
    if (pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '.'))
        ++pos_;
    }
    if (pos_ == start) fail(start, "expected an atomic proposition");
    return std::string(text_.substr(start, pos_ - start));
  }

  [[noreturn]] void fail(std::size_t at, const std::string& msg) const {
    throw SpecError(fmt::format("column {}: {} in '{}'", at + 1, msg, text_));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

bool evalAt(const std::vector<bool>& truth, const std::vector<TemporalOp>& ops, std::size_t level,
            std::size_t k) {
  if (level == ops.size()) return truth[k];
  const auto& op = ops[level];
  for (std::size_t j = k + op.window.lo; j <= k + op.window.hi; ++j) {
    bool v = evalAt(truth, ops, level + 1, j);
    if (op.kind == TemporalKind::Eventually && v) return true;
    if (op.kind == TemporalKind::Always && !v) return false;
  }
  return op.kind == TemporalKind::Always;
}

}  // namespace

SpecFormula::SpecFormula(std::vector<TemporalOp> ops, Literal literal)
    : ops_(std::move(ops)), literal_(std::move(literal)) {
  if (ops_.size() > 2) throw SpecError("unsupported nesting: more than two temporal operators");
  for (const auto& op : ops_)
    if (op.window.lo < 0 || op.window.lo > op.window.hi)
      throw SpecError(fmt::format("malformed interval [{},{}]", op.window.lo, op.window.hi));
  if (literal_.prop.empty()) throw SpecError("formula has no atomic proposition");
  if (ops_.empty()) {
    form_ = Form::Atom;
  } else if (ops_.size() == 1) {
    form_ = ops_[0].kind == TemporalKind::Eventually ? Form::F : Form::G;
  } else if (ops_[0].kind == TemporalKind::Eventually && ops_[1].kind == TemporalKind::Always) {
    form_ = Form::FG;
  } else if (ops_[0].kind == TemporalKind::Always && ops_[1].kind == TemporalKind::Eventually) {
    form_ = Form::GF;
  } else {
    throw SpecError("unsupported nesting: identical stacked operators");
  }
  paramSet_ = buildParamSet(ops_, 0);
  horizon_ = paramSet_.empty() ? 0 : *paramSet_.rbegin();
}

std::string SpecFormula::toString() const {
  std::string out;
  for (const auto& op : ops_)
    out += fmt::format("{}[{},{}] ", op.kind == TemporalKind::Eventually ? 'F' : 'G', op.window.lo, op.window.hi);
  if (literal_.negated) out += '!';
  out += literal_.prop;
  return out;
}

SpecFormula parseSpec(std::string_view text) { return Parser(text).parse(); }

Form classify(const SpecFormula& formula) { return formula.form(); }

const char* formName(Form form) {
  switch (form) {
    case Form::Atom: return "ATOM";
    case Form::F: return "F";
    case Form::G: return "G";
    case Form::FG: return "FG";
    case Form::GF: return "GF";
  }
  return "?";
}

bool evaluateTruth(const std::vector<bool>& literalTruth, const SpecFormula& formula, std::size_t k) {
  if (literalTruth.size() <= k + static_cast<std::size_t>(formula.horizon()))
    throw SpecError(fmt::format("word of length {} is too short to decide '{}' at index {}",
                                literalTruth.size(), formula.toString(), k));
  return evalAt(literalTruth, formula.ops(), 0, k);
}

bool evaluate(const Word& word, const SpecFormula& formula, std::size_t k) {
  std::vector<bool> truth(word.size());
  const auto& lit = formula.literal();
  for (std::size_t j = 0; j < word.size(); ++j) truth[j] = word[j].count(lit.prop) != lit.negated;
  return evaluateTruth(truth, formula, k);
}

SpecFile parseSpecFile(std::istream& in) {
  SpecFile out;
  std::string line;
  int lineNo = 0;
  bool haveTruth = false;
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string_view v(line);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    if (v.empty()) continue;
    bool star = false;
    if (v.front() == '*') {
      star = true;
      v.remove_prefix(1);
      while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    }
    std::string name = fmt::format("phi{}", out.specs.size() + 1);
    if (auto colon = v.find(':'); colon != std::string_view::npos) {
      auto n = v.substr(0, colon);
      while (!n.empty() && std::isspace(static_cast<unsigned char>(n.back()))) n.remove_suffix(1);
      if (n.empty()) throw SpecError(fmt::format("line {}: empty specification name", lineNo));
      name = std::string(n);
      v.remove_prefix(colon + 1);
    }
    try {
      out.specs.push_back({name, parseSpec(v)});
    } catch (const SpecError& e) {
      throw SpecError(fmt::format("line {}: {}", lineNo, e.what()));
    }
    if (star) {
      if (haveTruth) throw SpecError(fmt::format("line {}: more than one ground-truth marker", lineNo));
      haveTruth = true;
      out.groundTruth = out.specs.size() - 1;
    }
  }
  if (out.specs.empty()) throw SpecError("specification file contains no formulas");
  if (!haveTruth) throw SpecError("no ground-truth specification marked with '*'");
  return out;
}

SpecFile loadSpecFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError(fmt::format("{}: cannot open specification file", path));
  try {
    return parseSpecFile(in);
  } catch (const SpecError& e) {
    throw SpecError(fmt::format("{}: {}", path, e.what()));
  }
}

int ProblemInstance::horizon() const {
  int h = 0;
  for (const auto& s : specs) h = std::max(h, s.formula.horizon());
  return h;
}

void ProblemInstance::validate() const {
  if (specs.empty()) throw SpecError("problem instance has no specifications");
  if (groundTruth >= specs.size())
    throw SpecError(fmt::format("ground-truth index {} out of range for {} specifications", groundTruth + 1, specs.size()));
  if (!(gamma > 0.0 && gamma < 1.0 + 1e-12)) throw SpecError(fmt::format("gamma {} outside (0,1]", gamma));
  if (!(beta > 0.0 && beta < 1.0)) throw SpecError(fmt::format("beta {} outside (0,1)", beta));
  if (gamma < beta) throw SpecError(fmt::format("gamma {} is smaller than beta {}", gamma, beta));
}

}  // namespace veil
