#pragma once

// Artifact writers: RFC-4180 CSV tables, legacy ASCII VTK meshes and file
// checksums. Numbers are printed with 17 significant digits so that equal
// doubles always give equal bytes.

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "turboshape/mesh.hpp"
#include "turboshape/optimizer.hpp"
#include "turboshape/thermal.hpp"

namespace turboshape {

/// Shortest round-trip text for a double; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double v);

/// Quote a field when it contains a comma, quote, CR or LF (quotes doubled).
std::string csv_field(const std::string& s);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(std::vector<std::string> fields);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  /// CRLF line endings as in RFC 4180.
  std::string str() const;
  void write(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Parse RFC-4180 text; the first record is the header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

CsvTable iteration_table(const std::vector<IterationRecord>& log);
CsvTable front_table(const ParetoArchive& archive);
CsvTable coupling_table(const CouplingState& state);
CsvTable channel_table(const ChannelState& state, const ChannelGeometry& geom);
CsvTable stability_table(const StabilityMap& map);

struct VtkFields {
  /// Per triangle; the "status" field is always written first.
  std::map<std::string, std::vector<double>> cell_scalars;
  std::map<std::string, Eigen::VectorXd> point_scalars;
  /// Interleaved (x, y) per node.
  std::map<std::string, Eigen::VectorXd> point_vectors;
};

/// Legacy ASCII unstructured grid with every grid triangle (VTK type 5).
std::string vtk_string(const AdaptedMesh& mesh, const std::string& title, const VtkFields& fields = {});
void write_vtk(const std::string& path, const AdaptedMesh& mesh, const std::string& title,
               const VtkFields& fields = {});

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace turboshape
