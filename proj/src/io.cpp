#include "turboshape/io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "turboshape/errors.hpp"

namespace turboshape {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw InvalidArgument("csv: empty header");
}

CsvTable& CsvTable::row(std::vector<std::string> fields) {
  if (fields.size() != header_.size()) {
    throw InvalidArgument(fmt::format("csv: row has {} fields, header has {}", fields.size(), header_.size()));
  }
  rows_.push_back(std::move(fields));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& f) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i) out += ',';
      out += csv_field(f[i]);
    }
    out += "\r\n";
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::string& path) const { write_text(path, str()); }

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, in_quotes = false, any = false;
  auto end_field = [&] {
    rec.push_back(field);
    field.clear();
    quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(rec));
    rec.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      if (!field.empty() || quoted) throw InvalidArgument("csv: stray quote");
      in_quotes = quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field += c;
    }
  }
  if (in_quotes) throw InvalidArgument("csv: unterminated quoted field");
  if (any) end_record();
  if (records.empty()) throw InvalidArgument("csv: missing header row");
  CsvTable t(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) t.row(records[r]);
  return t;
}

CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path)); }

CsvTable iteration_table(const std::vector<IterationRecord>& log) {
  CsvTable t({"iteration", "J1", "J2", "J_weighted", "step", "grad_norm", "backtracks", "remeshed"});
  for (const auto& r : log) {
    t.row({std::to_string(r.iteration), format_number(r.J1), format_number(r.J2), format_number(r.Jw),
           format_number(r.step), format_number(r.grad_norm), std::to_string(r.backtracks),
           r.remeshed ? "1" : "0"});
  }
  return t;
}

CsvTable front_table(const ParetoArchive& archive) {
  CsvTable t({"omega1", "omega2", "J1", "J2", "mid_thickness", "iterations", "stop_reason"});
  for (const auto& r : archive.records()) {
    t.row({format_number(r.weight.w1), format_number(r.weight.w2), format_number(r.J1), format_number(r.J2),
           format_number(r.mid_thickness), std::to_string(r.log.empty() ? 0 : r.log.back().iteration),
           r.stop_reason});
  }
  return t;
}

CsvTable coupling_table(const CouplingState& state) {
  CsvTable t({"iteration", "outlet_T", "error"});
  for (std::size_t i = 0; i < state.outlet_T.size(); ++i) {
    t.row({std::to_string(i + 1), format_number(state.outlet_T[i]),
           format_number(i < state.error.size() ? state.error[i] : NAN)});
  }
  return t;
}

CsvTable channel_table(const ChannelState& state, const ChannelGeometry& geom) {
  CsvTable t({"face", "x", "v", "T", "p", "rho", "S"});
  for (std::size_t i = 0; i < state.v.size(); ++i) {
    // the source of a cell is reported on its outlet face
    const double S = i == 0 ? NAN : state.S[i - 1];
    t.row({std::to_string(i), format_number(static_cast<double>(i) * geom.dx()), format_number(state.v[i]),
           format_number(state.T[i]), format_number(state.p[i]), format_number(state.rho[i]), format_number(S)});
  }
  return t;
}

CsvTable stability_table(const StabilityMap& map) {
  CsvTable t({"h", "k", "verdict", "rate"});
  for (std::size_t i = 0; i < map.h.size(); ++i) {
    for (std::size_t j = 0; j < map.k.size(); ++j) {
      t.row({format_number(map.h[i]), format_number(map.k[j]), to_string(map.verdicts[i][j]),
             format_number(map.rates[i][j])});
    }
  }
  return t;
}

std::string vtk_string(const AdaptedMesh& mesh, const std::string& title, const VtkFields& fields) {
  if (title.find('\n') != std::string::npos) throw InvalidArgument("vtk: title must be a single line");
  const auto& g = mesh.grid;
  const int N = g.node_count(), T = g.triangle_count();
  std::string out = "# vtk DataFile Version 3.0\n" + title + "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out += fmt::format("POINTS {} double\n", N);
  for (const auto& p : g.nodes()) out += format_number(p.x()) + ' ' + format_number(p.y()) + " 0\n";
  out += fmt::format("CELLS {} {}\n", T, 4 * T);
  for (const auto& t : g.triangles()) out += fmt::format("3 {} {} {}\n", t[0], t[1], t[2]);
  out += fmt::format("CELL_TYPES {}\n", T);
  for (int t = 0; t < T; ++t) out += "5\n";

  out += fmt::format("CELL_DATA {}\nSCALARS status int 1\nLOOKUP_TABLE default\n", T);
  for (int t = 0; t < T; ++t) out += mesh.inside(t) ? "1\n" : "0\n";
  for (const auto& [name, v] : fields.cell_scalars) {
    if (static_cast<int>(v.size()) != T) throw InvalidArgument("vtk: cell field '" + name + "' has wrong size");
    out += fmt::format("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
    for (double x : v) out += format_number(x) + '\n';
  }
  if (!fields.point_scalars.empty() || !fields.point_vectors.empty()) out += fmt::format("POINT_DATA {}\n", N);
  for (const auto& [name, v] : fields.point_scalars) {
    if (v.size() != N) throw InvalidArgument("vtk: point field '" + name + "' has wrong size");
    out += fmt::format("SCALARS {} double 1\nLOOKUP_TABLE default\n", name);
    for (int n = 0; n < N; ++n) out += format_number(v[n]) + '\n';
  }
  for (const auto& [name, v] : fields.point_vectors) {
    if (v.size() != 2 * N) throw InvalidArgument("vtk: vector field '" + name + "' has wrong size");
    out += fmt::format("VECTORS {} double\n", name);
    for (int n = 0; n < N; ++n) out += format_number(v[2 * n]) + ' ' + format_number(v[2 * n + 1]) + " 0\n";
  }
  return out;
}

void write_vtk(const std::string& path, const AdaptedMesh& mesh, const std::string& title, const VtkFields& fields) {
  write_text(path, vtk_string(mesh, title, fields));
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw InvalidArgument("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read '" + path + "'");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text(path)); }

}  // namespace turboshape
