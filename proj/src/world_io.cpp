#include "cehhmm/world_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cehhmm {

using nlohmann::json;

namespace {

std::size_t get_count(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number_unsigned() || doc[key].get<std::size_t>() == 0) {
    throw FormatError(std::string("world: '") + key + "' must be a positive integer");
  }
  return doc[key].get<std::size_t>();
}

// Appends `rows` rows of `width` numbers found at doc[key] to out.
void read_rows(const json& doc, const char* key, std::size_t rows, std::size_t width,
               std::vector<double>& out) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw FormatError(std::string("world: missing table '") + key + "'");
  }
  const json& table = doc[key];
  if (table.size() != rows) {
    throw FormatError(std::string("world: table '") + key + "' has " +
                      std::to_string(table.size()) + " rows, expected " + std::to_string(rows));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const json& row = table[r];
    if (!row.is_array() || row.size() != width) {
      throw FormatError(std::string("world: table '") + key + "' row " + std::to_string(r) +
                        " must hold " + std::to_string(width) + " numbers");
    }
    for (const auto& v : row) {
      if (!v.is_number()) {
        throw FormatError(std::string("world: table '") + key + "' row " + std::to_string(r) +
                          " holds a non-number");
      }
      out.push_back(v.get<double>());
    }
  }
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

WorldModel parse_world(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("world: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kWorldSchema) {
    throw FormatError("world: schema must be \"" + std::string(kWorldSchema) + "\"");
  }
  const std::size_t z = get_count(doc, "num_states");
  const std::size_t x = get_count(doc, "num_actions");
  const std::size_t y = get_count(doc, "num_observations");

  // Row 0 is the sentinel (initial) row, then (z_prev, x_prev) row-major.
  std::vector<double> transition_rows;
  read_rows(doc, "transition", 1 + z * x, z, transition_rows);
  std::vector<double> initial(transition_rows.begin(), transition_rows.begin() + z);
  std::vector<double> transition(transition_rows.begin() + z, transition_rows.end());

  std::vector<double> observation;
  read_rows(doc, "observation", z, y, observation);

  if (!doc.contains("evaluation") || !doc["evaluation"].is_object()) {
    throw FormatError("world: missing 'evaluation' object");
  }
  const json& ev = doc["evaluation"];
  const std::string kind = ev.value("kind", "");
  std::vector<double> table;
  read_rows(ev, "table", x * y, z, table);

  try {
    Evaluation evaluation = kind == "terminal" ? Evaluation::terminal(x, y, z, std::move(table))
                            : kind == "additive"
                                ? Evaluation::additive(x, y, z, std::move(table))
                                : throw FormatError("world: evaluation kind must be "
                                                    "\"terminal\" or \"additive\"");
    return WorldModel(z, x, y, std::move(initial), std::move(transition), std::move(observation),
                      std::move(evaluation));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("world: ") + e.what());
  }
}

WorldModel load_world(const std::filesystem::path& path) { return parse_world(read_text_file(path)); }

std::string world_to_text(const WorldModel& world) {
  const Evaluation& ev = world.evaluation();
  if (!ev.tabular()) throw ConfigError("only tabular evaluations can be serialized");
  const std::size_t z = world.num_states(), x = world.num_actions(), y = world.num_observations();

  json doc;
  doc["schema"] = kWorldSchema;
  doc["num_states"] = z;
  doc["num_actions"] = x;
  doc["num_observations"] = y;
  json transition = json::array();
  auto init = world.initial_row();
  transition.push_back(std::vector<double>(init.begin(), init.end()));
  for (StateId zp = 0; zp < z; ++zp) {
    for (Symbol xp = 0; xp < x; ++xp) {
      auto row = world.transition_row(zp, xp);
      transition.push_back(std::vector<double>(row.begin(), row.end()));
    }
  }
  doc["transition"] = std::move(transition);
  json observation = json::array();
  for (StateId s = 0; s < z; ++s) {
    auto row = world.observation_row(s);
    observation.push_back(std::vector<double>(row.begin(), row.end()));
  }
  doc["observation"] = std::move(observation);
  json table = json::array();
  auto flat = ev.table();
  for (std::size_t r = 0; r < x * y; ++r) {
    table.push_back(std::vector<double>(flat.begin() + r * z, flat.begin() + (r + 1) * z));
  }
  doc["evaluation"] = {{"kind", ev.kind() == Evaluation::Kind::Terminal ? "terminal" : "additive"},
                       {"table", std::move(table)}};
  return doc.dump(2) + "\n";
}

}  // namespace cehhmm
