#pragma once

#include <iosfwd>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace veil {

class SpecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TemporalKind { Eventually, Always };
enum class Form { Atom, F, G, FG, GF };

struct Interval {
  int lo = 0;
  int hi = 0;
  int width() const { return hi - lo; }
};

struct TemporalOp {
  TemporalKind kind;
  Interval window;
};

struct Literal {
  std::string prop;
  bool negated = false;
};

/// A formula of the supported fragment: at most two bounded temporal
/// operators (outermost first) over a single literal.
class SpecFormula {
 public:
  SpecFormula(std::vector<TemporalOp> ops, Literal literal);

  const std::vector<TemporalOp>& ops() const { return ops_; }
  const Literal& literal() const { return literal_; }
  const std::set<int>& paramSet() const { return paramSet_; }
  int horizon() const { return horizon_; }
  Form form() const { return form_; }

  std::string toString() const;

 private:
  std::vector<TemporalOp> ops_;
  Literal literal_;
  std::set<int> paramSet_;
  int horizon_ = 0;
  Form form_ = Form::Atom;
};

SpecFormula parseSpec(std::string_view text);
Form classify(const SpecFormula& formula);
const char* formName(Form form);

using LabelSet = std::set<std::string>;
using Word = std::vector<LabelSet>;

/// Truth of (w, k) |= formula. Requires w.size() > k + horizon.
bool evaluate(const Word& word, const SpecFormula& formula, std::size_t k = 0);

/// Same as evaluate, on the precomputed truth sequence of the formula's literal.
bool evaluateTruth(const std::vector<bool>& literalTruth, const SpecFormula& formula,
                   std::size_t k = 0);

struct NamedSpec {
  std::string name;
  SpecFormula formula;
};

struct SpecFile {
  std::vector<NamedSpec> specs;
  std::size_t groundTruth = 0;  // 0-based
};

/// Line format: `[*] [name:] formula`, `#` starts a comment.
SpecFile parseSpecFile(std::istream& in);
SpecFile loadSpecFile(const std::string& path);

struct ProblemInstance {
  std::vector<NamedSpec> specs;
  std::size_t groundTruth = 0;  // 0-based
  double gamma = 0.95;
  double beta = 0.8;

  std::size_t size() const { return specs.size(); }
  int horizon() const;  // max over spec horizons
  void validate() const;
};

}  // namespace veil
