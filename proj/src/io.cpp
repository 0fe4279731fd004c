#include "cimsim/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cimsim {

using nlohmann::json;

namespace {

template <typename Scalar>
json flat(const MatrixX<Scalar>& m) {
  return json(std::vector<Scalar>(m.data(), m.data() + m.size()));
}

template <typename Scalar>
MatrixX<Scalar> unflat(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  const auto v = j.get<std::vector<Scalar>>();
  if (static_cast<Eigen::Index>(v.size()) != rows * cols)
    throw DataError(what + ": " + std::to_string(v.size()) + " values for a " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " array");
  MatrixX<Scalar> m(rows, cols);
  std::copy(v.begin(), v.end(), m.data());
  return m;
}

void check_schema(const json& j, int expected, const std::string& kind) {
  if (!j.contains("schema_version")) throw DataError(kind + " file has no schema_version");
  const int v = j.at("schema_version").get<int>();
  if (v != expected)
    throw DataError(kind + " schema_version " + std::to_string(v) + " is not supported (expected " +
                    std::to_string(expected) + ")");
}

template <typename F>
auto parsing(const std::string& kind, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(kind + ": " + e.what());
  }
}

}  // namespace

std::string model_to_json(const NetworkSpec& net, const Parameters& params) {
  check_parameters(net, params);
  json j;
  j["schema_version"] = kModelSchemaVersion;
  json layers = json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"kind", to_string(l.kind)}, {"in", l.in_dim}, {"out", l.out_dim}});
  j["layers"] = layers;
  json dense = json::array();
  for (const auto& p : params.dense) dense.push_back({{"weight", flat(p.weight)}, {"bias", flat<double>(p.bias)}});
  j["dense"] = dense;
  return j.dump(1) + "\n";
}

Model model_from_json(const std::string& text) {
  return parsing("model", [&] {
    const json j = json::parse(text);
    check_schema(j, kModelSchemaVersion, "model");
    std::vector<LayerSpec> layers;
    for (const auto& l : j.at("layers"))
      layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()), l.at("in").get<Eigen::Index>(),
                        l.at("out").get<Eigen::Index>()});
    Model m{NetworkSpec(std::move(layers)), {}};
    const auto& dense = j.at("dense");
    std::size_t k = 0;
    for (const auto& l : m.net.layers()) {
      if (l.kind != LayerKind::dense) continue;
      if (k >= dense.size()) throw DataError("model: fewer parameter blocks than dense layers");
      const auto& d = dense[k++];
      DenseParams<double> p;
      p.weight = unflat<double>(d.at("weight"), l.out_dim, l.in_dim, "model weight");
      p.bias = unflat<double>(d.at("bias"), l.out_dim, 1, "model bias");
      m.params.dense.push_back(std::move(p));
    }
    if (k != dense.size()) throw DataError("model: more parameter blocks than dense layers");
    check_parameters(m.net, m.params);
    return m;
  });
}

void save_model(const std::filesystem::path& file, const NetworkSpec& net, const Parameters& params) {
  write_text(file, model_to_json(net, params));
}

Model load_model(const std::filesystem::path& file) { return model_from_json(read_text(file)); }

std::string mapped_layer_to_json(const MappedLayer& layer) {
  layer.validate();
  const auto& c = layer.config;
  json j;
  j["schema_version"] = kMappedLayerSchemaVersion;
  j["config"] = {{"rows", c.rows},           {"cols", c.cols},
                 {"bits_per_device", c.bits_per_device},
                 {"g_min", c.g_min},         {"g_max", c.g_max},
                 {"adc_bits", c.adc_bits ? json(*c.adc_bits) : json(nullptr)},
                 {"dac_bits", c.dac_bits ? json(*c.dac_bits) : json(nullptr)},
                 {"differential", c.differential},
                 {"v_read", c.v_read}};
  j["out_dim"] = layer.out_dim;
  j["in_dim"] = layer.in_dim;
  j["weight_bits"] = layer.weight_bits;
  j["scale"] = layer.scale;
  j["c1"] = layer.c1;
  j["c0"] = layer.c0;
  j["level_offset"] = layer.level_offset;
  j["slice_weights"] = layer.slice_weights;  // most significant first
  j["row_tiles"] = layer.row_tiles;
  j["col_tiles"] = layer.col_tiles;
  json tiles = json::array();
  for (const auto& t : layer.tiles) tiles.push_back({{"conductance", flat(t.conductance)}, {"faults", flat(t.faults)}});
  j["tiles"] = tiles;
  return j.dump() + "\n";
}

MappedLayer mapped_layer_from_json(const std::string& text) {
  return parsing("mapped layer", [&] {
    const json j = json::parse(text);
    check_schema(j, kMappedLayerSchemaVersion, "mapped layer");
    MappedLayer m;
    const auto& c = j.at("config");
    m.config.rows = c.at("rows").get<Eigen::Index>();
    m.config.cols = c.at("cols").get<Eigen::Index>();
    m.config.bits_per_device = c.at("bits_per_device").get<int>();
    m.config.g_min = c.at("g_min").get<double>();
    m.config.g_max = c.at("g_max").get<double>();
    if (!c.at("adc_bits").is_null()) m.config.adc_bits = c.at("adc_bits").get<int>();
    if (!c.at("dac_bits").is_null()) m.config.dac_bits = c.at("dac_bits").get<int>();
    m.config.differential = c.at("differential").get<bool>();
    m.config.v_read = c.at("v_read").get<double>();
    m.out_dim = j.at("out_dim").get<Eigen::Index>();
    m.in_dim = j.at("in_dim").get<Eigen::Index>();
    m.weight_bits = j.at("weight_bits").get<int>();
    m.scale = j.at("scale").get<double>();
    m.c1 = j.at("c1").get<double>();
    m.c0 = j.at("c0").get<double>();
    m.level_offset = j.at("level_offset").get<double>();
    m.slice_weights = j.at("slice_weights").get<std::vector<double>>();
    m.row_tiles = j.at("row_tiles").get<Eigen::Index>();
    m.col_tiles = j.at("col_tiles").get<Eigen::Index>();
    for (const auto& t : j.at("tiles")) {
      ConductanceTile tile;
      tile.conductance = unflat<double>(t.at("conductance"), m.config.rows, m.config.cols, "tile conductance");
      tile.faults = unflat<std::uint8_t>(t.at("faults"), m.config.rows, m.config.cols, "tile faults");
      m.tiles.push_back(std::move(tile));
    }
    m.validate();
    return m;
  });
}

void save_mapped_layer(const std::filesystem::path& file, const MappedLayer& layer) {
  write_text(file, mapped_layer_to_json(layer));
}

MappedLayer load_mapped_layer(const std::filesystem::path& file) {
  return mapped_layer_from_json(read_text(file));
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("csv table needs at least one column");
}

void CsvTable::add_row(std::vector<Cell> row) {
  if (row.size() != header_.size())
    throw DimensionError("csv row has " + std::to_string(row.size()) + " cells, header has " +
                         std::to_string(header_.size()));
  rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
  std::ostringstream out;
  auto cell = [](const Cell& c) -> std::string {
    if (const auto* s = std::get_if<std::string>(&c)) {
      if (s->find_first_of(",\"\n") == std::string::npos) return *s;
      std::string q = "\"";
      for (char ch : *s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      return q + "\"";
    }
    if (const auto* d = std::get_if<double>(&c)) return format_double(*d);
    return std::to_string(std::get<std::int64_t>(c));
  };
  for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(row[i]);
    out << '\n';
  }
  return out.str();
}

void CsvTable::write(const std::filesystem::path& file) const { write_text(file, str()); }

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open " + file.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
  if (!out) throw DataError("write failed for " + file.string());
}

}  // namespace cimsim
