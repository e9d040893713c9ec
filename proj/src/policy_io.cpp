#include "cehhmm/policy_io.hpp"

#include <cmath>
#include <fstream>

#include "cehhmm/world_io.hpp"
#include "json.hpp"

namespace cehhmm {

using nlohmann::json;

namespace {

constexpr double kLoadTolerance = 1e-9;

json axis_to_json(const Axis& axis) {
  return {{"name", axis.name},
          {"cardinality", axis.cardinality},
          {"start_sentinel", axis.start_sentinel}};
}

Axis axis_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("name") || !j.contains("cardinality") ||
      !j.contains("start_sentinel")) {
    throw FormatError(where + ": malformed axis");
  }
  return Axis{j["name"].get<std::string>(), j["cardinality"].get<std::size_t>(),
              j["start_sentinel"].get<bool>()};
}

}  // namespace

std::string serialize(const PolicyParams& params) {
  const auto& s = params.structure();
  json doc;
  doc["schema"] = kPolicySchema;
  doc["structure"] = {{"num_levels", s.num_levels()},
                      {"level_cardinalities", s.level_cardinalities},
                      {"num_actions", s.num_actions},
                      {"num_observations", s.num_observations}};
  json tables = json::array();
  for (const auto& table : params.tables()) {
    json rows = json::array();
    for (std::size_t r = 0; r < table.rows(); ++r) {
      auto row = table.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    tables.push_back({{"name", table.name()},
                      {"condition", {axis_to_json(table.first_axis()), axis_to_json(table.second_axis())}},
                      {"outcomes", table.outcomes()},
                      {"rows", std::move(rows)}});
  }
  doc["tables"] = std::move(tables);
  return doc.dump(1) + "\n";
}

PolicyParams deserialize(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("policy: ") + e.what());
  }
  if (!doc.is_object() || doc.value("schema", "") != kPolicySchema) {
    throw FormatError("policy: schema must be \"" + std::string(kPolicySchema) + "\"");
  }
  HhmmStructure s;
  try {
    const json& js = doc.at("structure");
    s.level_cardinalities = js.at("level_cardinalities").get<std::vector<std::size_t>>();
    s.num_actions = js.at("num_actions").get<std::size_t>();
    s.num_observations = js.at("num_observations").get<std::size_t>();
    if (js.at("num_levels").get<std::size_t>() != s.num_levels()) {
      throw FormatError("policy: num_levels disagrees with level_cardinalities");
    }
    s.validate();
  } catch (const json::exception& e) {
    throw FormatError(std::string("policy: structure: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("policy: structure: ") + e.what());
  }

  PolicyParams params(s);
  if (!doc.contains("tables") || !doc["tables"].is_array() ||
      doc["tables"].size() != params.tables().size()) {
    throw FormatError("policy: expected " + std::to_string(params.tables().size()) + " tables");
  }
  for (std::size_t k = 0; k < params.tables().size(); ++k) {
    auto& table = params.tables()[k];
    const json& jt = doc["tables"][k];
    const std::string where = "policy: table " + table.name();
    if (!jt.is_object() || jt.value("name", "") != table.name()) {
      throw FormatError("policy: table " + std::to_string(k) + " must be named " + table.name());
    }
    if (!jt.contains("condition") || !jt["condition"].is_array() || jt["condition"].size() != 2) {
      throw FormatError(where + ": needs two condition axes");
    }
    if (axis_from_json(jt["condition"][0], where) != table.first_axis() ||
        axis_from_json(jt["condition"][1], where) != table.second_axis() ||
        jt.value("outcomes", std::size_t{0}) != table.outcomes()) {
      throw FormatError(where + ": shape does not match the structure");
    }
    const json& rows = jt.contains("rows") ? jt["rows"] : json();
    if (!rows.is_array() || rows.size() != table.rows()) {
      throw FormatError(where + ": expected " + std::to_string(table.rows()) + " rows");
    }
    for (std::size_t r = 0; r < table.rows(); ++r) {
      const json& jr = rows[r];
      if (!jr.is_array() || jr.size() != table.outcomes()) {
        throw FormatError(where + " row " + std::to_string(r) + ": expected " +
                          std::to_string(table.outcomes()) + " entries");
      }
      auto row = table.row(r);
      double sum = 0.0;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (!jr[i].is_number()) throw FormatError(where + " row " + std::to_string(r) + ": non-number");
        row[i] = jr[i].get<double>();
        if (!(row[i] >= 0.0 && row[i] <= 1.0)) {
          throw FormatError(where + " row " + std::to_string(r) + ": probability outside [0,1]");
        }
        sum += row[i];
      }
      if (std::abs(sum - 1.0) > kLoadTolerance) {
        throw FormatError(where + " row " + std::to_string(r) + " sums to " + std::to_string(sum));
      }
      // Accepted rows are brought within the in-memory tolerance.
      if (std::abs(sum - 1.0) > 1e-12) {
        for (double& p : row) p /= sum;
      }
    }
  }
  return params;
}

void save_policy(const PolicyParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << serialize(params);
}

PolicyParams load_policy(const std::filesystem::path& path) {
  return deserialize(read_text_file(path));
}

}  // namespace cehhmm
