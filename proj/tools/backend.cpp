#include "backend.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace veil::cli {

namespace fs = std::filesystem;

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

}  // namespace

opt::FeasibilityOracle externalOracle(const std::string& executable, double feasTol) {
  return [executable, feasTol](const opt::SynthesisProgram& program, double theta) {
    const fs::path dir = fs::temp_directory_path();
    const auto stem = fmt::format("veil-{}-{:.12g}", reinterpret_cast<std::uintptr_t>(&program), theta);
    const fs::path in = dir / (stem + ".program.json"), out = dir / (stem + ".witness.json");
    {
      std::ofstream f(in);
      f << opt::exportProgram(program, theta).dump() << '\n';
    }
    fs::remove(out);
    const int code = std::system(fmt::format("{} {} {}", quote(executable), quote(in.string()), quote(out.string())).c_str());
    fs::remove(in);
    opt::FeasibilityResult res;
    res.certified = false;
    if (code != 0 || !fs::exists(out)) {
      fs::remove(out);
      throw std::runtime_error(fmt::format("external backend '{}' failed at theta {} (exit {})", executable, theta, code));
    }
    nlohmann::json doc;
    {
      std::ifstream f(out);
      doc = nlohmann::json::parse(f);
    }
    fs::remove(out);
    const std::string status = doc.value("status", "");
    if (status == "infeasible") {
      res.certified = true;
      return res;
    }
    if (status != "feasible") throw std::runtime_error(fmt::format("external backend reported status '{}'", status));
    auto x = opt::importWitness(program, doc);
    const auto check = opt::checkWitness(program, x, theta);
    if (!check.feasible(feasTol)) return res;
    res.verdict = opt::Verdict::Feasible;
    res.certified = true;
    res.gap = check.gap;
    res.witness = std::move(x);
    return res;
  };
}

}  // namespace veil::cli
