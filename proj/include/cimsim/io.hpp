#pragma once

// Model and mapped-layer persistence (JSON with schema_version) and CSV reports.

#include "cimsim/crossbar.hpp"
#include "cimsim/nn.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace cimsim {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr int kMappedLayerSchemaVersion = 1;

struct Model {
  NetworkSpec net;
  Parameters params;
};

std::string model_to_json(const NetworkSpec& net, const Parameters& params);
Model model_from_json(const std::string& text);
void save_model(const std::filesystem::path& file, const NetworkSpec& net, const Parameters& params);
Model load_model(const std::filesystem::path& file);

std::string mapped_layer_to_json(const MappedLayer& layer);
MappedLayer mapped_layer_from_json(const std::string& text);
void save_mapped_layer(const std::filesystem::path& file, const MappedLayer& layer);
MappedLayer load_mapped_layer(const std::filesystem::path& file);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

class CsvTable {
 public:
  using Cell = std::variant<std::string, double, std::int64_t>;

  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<Cell> row);
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& file) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, const std::string& text);

}  // namespace cimsim
