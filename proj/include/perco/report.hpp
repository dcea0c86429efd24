#ifndef PERCO_REPORT_HPP
#define PERCO_REPORT_HPP

#include "perco/experiments.hpp"
#include "perco/skeleton.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace perco::report {

using Json = nlohmann::ordered_json;

/// Shortest decimal that reads back to the same double.
std::string fmt(double x);
std::string fmt(const Site& s, char sep = ' ');

/// FNV-1a, 64 bit, as 16 lowercase hex digits.
std::string fnv1a64(const std::string& bytes);

class Csv {
 public:
  explicit Csv(std::vector<std::string> header);
  Csv& row(const std::vector<std::string>& cells);
  const std::string& str() const { return text_; }

 private:
  std::size_t width_;
  std::string text_;
};

Json to_json(const Site& s);
Json to_json(const Point& x);
Json to_json(const LatticeBox& box);
Json to_json(const Eigen::MatrixXd& m);

Json to_json(const Estimate& e);
Json to_json(const XiEstimate& xi);
Csv xi_csv(const XiEstimate& xi);
Json to_json(const PrefactorEstimate& pf);
Csv prefactor_csv(const OzScan& scan);
Json to_json(const LLTReport& r);
Csv llt_csv(const LLTReport& r);
Json to_json(const TailReport& t);
void append_tail_rows(Csv& csv, const TailReport& t);
Csv tail_csv_header();
Csv mass_gap_csv(const MassGapTable& t);
Json to_json(const Skeleton& s);
Json to_json(const TreeSkeleton& tree, const DeltaGoodReport& good);
Csv tree_csv(const TreeSkeleton& tree);

}  // namespace perco::report

#endif
