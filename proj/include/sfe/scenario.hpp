#pragma once

// File I/O layer: scenario JSON ingestion, deterministic CSV/JSON emission
// (9 significant digits, '.' decimal, ',' separator, LF endings, header
// row), and atomic artifact writes.  Node and producer ids in emitted files
// are zero-based positions in scenario file order.

#include <Eigen/Dense>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sfe/cost.hpp"
#include "sfe/dispatch.hpp"
#include "sfe/equilibrium.hpp"
#include "sfe/errors.hpp"
#include "sfe/indices.hpp"
#include "sfe/network.hpp"
#include "sfe/two_node.hpp"

namespace sfe {

struct Scenario {
  NetworkModel net;
  std::vector<Producer> producers;
  bool has_bids = false;
  Eigen::VectorXd bids;
};

inline std::string format_number(double v) {
  if (v == 0.0) v = std::fabs(v);  // normalize negative zero
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_atomic(const std::string& path,
                              const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write file: " + path);
    out << bytes;
    if (!out.good()) throw InputError("cannot write file: " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw InputError("cannot write file: " + path);
}

namespace detail {

inline const nlohmann::json& json_field(const nlohmann::json& obj,
                                        const char* name) {
  auto it = obj.find(name);
  if (it == obj.end())
    throw InputError(std::string("scenario: missing field '") + name + "'");
  return *it;
}

inline double json_number(const nlohmann::json& v, const char* what) {
  if (!v.is_number())
    throw InputError(std::string("scenario: field '") + what +
                     "' must be a number");
  return v.get<double>();
}

inline long long json_integer(const nlohmann::json& v, const char* what) {
  if (!v.is_number_integer())
    throw InputError(std::string("scenario: field '") + what +
                     "' must be an integer");
  return v.get<long long>();
}

inline Eigen::VectorXd json_vector(const nlohmann::json& v, const char* what) {
  if (!v.is_array())
    throw InputError(std::string("scenario: field '") + what +
                     "' must be an array");
  Eigen::VectorXd out(static_cast<int>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k)
    out[static_cast<int>(k)] = json_number(v[k], what);
  return out;
}

inline CostSpec parse_cost(const nlohmann::json& c, int producer_index) {
  std::string ctx = "producer " + std::to_string(producer_index);
  try {
    if (!c.is_object()) throw InputError("cost must be an object");
    std::string type = json_field(c, "type").get<std::string>();
    if (type == "linear")
      return CostSpec::linear(json_number(json_field(c, "beta"), "beta"));
    if (type == "quadratic")
      return CostSpec::quadratic(json_number(json_field(c, "alpha"), "alpha"),
                                 json_number(json_field(c, "beta"), "beta"));
    if (type == "pwq") {
      const nlohmann::json& arr = json_field(c, "pieces");
      if (!arr.is_array() || arr.empty())
        throw InputError("pieces must be a nonempty array");
      std::vector<CostPiece> pieces;
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const nlohmann::json& p = arr[k];
        CostPiece piece;
        piece.alpha = json_number(json_field(p, "alpha"), "alpha");
        piece.beta = json_number(json_field(p, "beta"), "beta");
        piece.length = kInf;
        if (p.contains("length") && !p["length"].is_null())
          piece.length = json_number(p["length"], "length");
        pieces.push_back(piece);
      }
      return CostSpec::piecewise(pieces);
    }
    throw InputError("unknown cost type '" + type + "'");
  } catch (const InputError& e) {
    throw InputError(ctx + ": " + e.what());
  }
}

}  // namespace detail

inline Scenario parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid scenario json: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("scenario: top level must be an object");

  Scenario sc;
  std::map<long long, int> node_index;
  int node_count = 0;

  if (doc.contains("H")) {
    const nlohmann::json& hj = doc["H"];
    if (!hj.is_array()) throw InputError("scenario: field 'H' must be an array");
    Eigen::VectorXd c = detail::json_vector(detail::json_field(doc, "c"), "c");
    Eigen::VectorXd d =
        detail::json_vector(detail::json_field(doc, "demand"), "demand");
    Eigen::MatrixXd H(static_cast<int>(hj.size()), d.size());
    for (std::size_t r = 0; r < hj.size(); ++r) {
      Eigen::VectorXd row = detail::json_vector(hj[r], "H");
      if (row.size() != d.size())
        throw InputError("scenario: 'H' rows must match 'demand' length");
      H.row(static_cast<int>(r)) = row.transpose();
    }
    sc.net = make_network(H, c, d);
    node_count = sc.net.node_count;
    for (int i = 0; i < node_count; ++i) node_index[i] = i;
  } else {
    const nlohmann::json& nodes = detail::json_field(doc, "nodes");
    if (!nodes.is_array() || nodes.empty())
      throw InputError("scenario: field 'nodes' must be a nonempty array");
    Eigen::VectorXd d(static_cast<int>(nodes.size()));
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const nlohmann::json& nd = nodes[k];
      long long id = detail::json_integer(detail::json_field(nd, "id"), "id");
      if (node_index.count(id))
        throw InputError("scenario: duplicate node id " + std::to_string(id));
      node_index[id] = static_cast<int>(k);
      d[static_cast<int>(k)] =
          detail::json_number(detail::json_field(nd, "demand"), "demand");
    }
    node_count = static_cast<int>(nodes.size());

    std::vector<LineSpec> lines;
    if (doc.contains("lines")) {
      const nlohmann::json& lj = doc["lines"];
      if (!lj.is_array())
        throw InputError("scenario: field 'lines' must be an array");
      for (std::size_t k = 0; k < lj.size(); ++k) {
        const nlohmann::json& l = lj[k];
        LineSpec ls;
        long long from =
            detail::json_integer(detail::json_field(l, "from"), "from");
        long long to = detail::json_integer(detail::json_field(l, "to"), "to");
        if (!node_index.count(from) || !node_index.count(to))
          throw InputError("scenario: line " + std::to_string(k) +
                           " references an unknown node id");
        ls.from = node_index[from];
        ls.to = node_index[to];
        ls.capacity =
            detail::json_number(detail::json_field(l, "capacity"), "capacity");
        if (l.contains("reactance") && !l["reactance"].is_null())
          ls.reactance = detail::json_number(l["reactance"], "reactance");
        lines.push_back(ls);
      }
    }
    long long slack_id =
        detail::json_integer(detail::json_field(doc, "slack"), "slack");
    if (!node_index.count(slack_id))
      throw InputError("scenario: slack references an unknown node id");
    sc.net = build_network(lines, d, node_index[slack_id]);
  }

  if (doc.contains("producers")) {
    const nlohmann::json& pj = doc["producers"];
    if (!pj.is_array())
      throw InputError("scenario: field 'producers' must be an array");
    for (std::size_t k = 0; k < pj.size(); ++k) {
      const nlohmann::json& p = pj[k];
      Producer pr;
      long long nid = detail::json_integer(detail::json_field(p, "node"), "node");
      if (!node_index.count(nid))
        throw InputError("scenario: producer " + std::to_string(k) +
                         " references an unknown node id");
      pr.node = node_index[nid];
      pr.capacity =
          detail::json_number(detail::json_field(p, "capacity"), "capacity");
      pr.cost = detail::parse_cost(detail::json_field(p, "cost"),
                                   static_cast<int>(k));
      sc.producers.push_back(pr);
    }
  }

  if (doc.contains("bids")) {
    sc.bids = detail::json_vector(doc["bids"], "bids");
    if (sc.bids.size() != static_cast<int>(sc.producers.size()))
      throw InputError("scenario: 'bids' length must match 'producers'");
    sc.has_bids = true;
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  return parse_scenario(read_file(path));
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

inline std::string dispatch_csv(const NetworkModel& net,
                                const std::vector<Producer>& producers,
                                const DispatchOutcome& out) {
  std::string s = "scope,id,node,quantity,price,cost\n";
  for (int i = 0; i < net.node_count; ++i)
    s += "node," + std::to_string(i) + "," + std::to_string(i) + "," +
         format_number(out.q[i]) + "," + format_number(out.p[i]) + ",\n";
  for (std::size_t j = 0; j < producers.size(); ++j)
    s += "producer," + std::to_string(j) + "," +
         std::to_string(producers[j].node) + "," +
         format_number(out.x[static_cast<int>(j)]) + ",," +
         format_number(
             producers[j].cost.eval(out.x[static_cast<int>(j)]).value) +
         "\n";
  if (out.negative_allocation) s += "# negative_allocation=1\n";
  return s;
}

inline std::string equilibrium_csv(const NetworkModel& net,
                                   const std::vector<Producer>& producers,
                                   const EquilibriumOutcome& eq) {
  bool have_report = true;
  IndexReport rep;
  try {
    rep = build_index_report(net, producers, &eq);
  } catch (const Refusal&) {
    have_report = false;  // degenerate nodal supply; omit index columns
  }
  std::string s = "scope,id,quantity,price,theta,payoff,lerner,ms,rsi\n";
  for (int i = 0; i < net.node_count; ++i)
    s += "node," + std::to_string(i) + "," + format_number(eq.dispatch.q[i]) +
         "," + format_number(eq.dispatch.p[i]) + ",,,,,\n";
  for (std::size_t j = 0; j < producers.size(); ++j) {
    int jj = static_cast<int>(j);
    s += "producer," + std::to_string(j) + "," +
         format_number(eq.dispatch.x[jj]) + "," +
         format_number(eq.dispatch.p[producers[j].node]) + "," +
         format_number(eq.theta[jj]) + "," + format_number(eq.payoffs[jj]) +
         ",";
    if (have_report && rep.rows[j].has_lerner)
      s += format_number(rep.rows[j].lerner);
    s += ",";
    if (have_report)
      s += format_number(rep.rows[j].market_share) + "," +
           format_number(rep.rows[j].rsi);
    else
      s += ",";
    s += "\n";
  }
  s += "# kind=" + eq.kind + " verified=" + (eq.verified ? "1" : "0") +
       " max_deviation_gain=" + format_number(eq.max_deviation_gain) +
       " iso_optimal=" + (eq.iso_optimal ? std::string("1") : std::string("0")) +
       " iso_payoff=" + format_number(eq.iso_payoff);
  if (!eq.note.empty()) s += " note=" + eq.note;
  s += "\n";
  return s;
}

inline std::string index_csv(const IndexReport& rep) {
  std::string s = "producer,node,capacity,qmax,ms,rsi,lerner\n";
  for (const IndexRow& r : rep.rows) {
    s += std::to_string(r.producer) + "," + std::to_string(r.node) + "," +
         format_number(r.capacity) + "," + format_number(rep.qmax[r.node]) +
         "," + format_number(r.market_share) + "," + format_number(r.rsi) +
         ",";
    if (r.has_lerner) s += format_number(r.lerner);
    s += "\n";
  }
  s += std::string("# pivotal_present=") + (rep.pivotal_present ? "1" : "0") +
       " poa_bound=" +
       (rep.has_poa_bound ? format_number(rep.poa_bound) : std::string("none")) +
       "\n";
  return s;
}

inline std::string envelope_csv(const std::vector<EnvelopeResult>& rows) {
  std::string s = "rsi,price,mc,ms,bound,flag,exceedance\n";
  for (const EnvelopeResult& r : rows) {
    s += format_number(r.row.rsi) + "," + format_number(r.row.price) + "," +
         format_number(r.row.mc) + "," + format_number(r.row.ms) + ",";
    if (r.has_bound)
      s += format_number(r.bound) + "," + (r.exceeded ? "1" : "0") + "," +
           format_number(r.excess);
    else
      s += "no-bound,0,0";
    s += "\n";
  }
  return s;
}

inline std::vector<EnvelopeRow> parse_envelope_csv(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char ch : text) {
    if (ch == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  if (lines.empty()) throw InputError("envelope csv: empty file");

  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string tok;
    for (char ch : line) {
      if (ch == ',') {
        out.push_back(tok);
        tok.clear();
      } else {
        tok += ch;
      }
    }
    out.push_back(tok);
    return out;
  };

  std::vector<std::string> header = split(lines[0]);
  if (header.size() < 2 || header.size() > 4 || header[0] != "rsi" ||
      header[1] != "price")
    throw InputError("envelope csv: header must be rsi,price[,mc][,ms]");
  int mc_col = -1, ms_col = -1;
  for (std::size_t k = 2; k < header.size(); ++k) {
    if (header[k] == "mc" && mc_col < 0)
      mc_col = static_cast<int>(k);
    else if (header[k] == "ms" && ms_col < 0)
      ms_col = static_cast<int>(k);
    else
      throw InputError("envelope csv: header must be rsi,price[,mc][,ms]");
  }

  auto value = [](const std::string& tok, std::size_t row) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw InputError("envelope csv: bad number in row " + std::to_string(row));
    return v;
  };

  std::vector<EnvelopeRow> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    std::vector<std::string> toks = split(lines[r]);
    if (toks.size() != header.size())
      throw InputError("envelope csv: row " + std::to_string(r) +
                       " has wrong field count");
    EnvelopeRow row;
    row.rsi = value(toks[0], r);
    row.price = value(toks[1], r);
    if (mc_col >= 0) row.mc = value(toks[mc_col], r);
    if (ms_col >= 0) row.ms = value(toks[ms_col], r);
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_csv(const SweepResult& sw) {
  std::string s = "c,q1,q2,p1,p2,cost_ne,cost_eff,braess\n";
  for (const SweepRow& r : sw.rows)
    s += format_number(r.c) + "," + format_number(r.q1) + "," +
         format_number(r.q2) + "," + format_number(r.p1) + "," +
         format_number(r.p2) + "," + format_number(r.cost_ne) + "," +
         format_number(r.cost_eff) + "," + (r.braess ? "1" : "0") + "\n";
  s += "# q_tilde=" + format_number(sw.q_tilde) + " switch_c=" +
       (sw.has_switch ? format_number(sw.switch_c) : std::string("none")) +
       " direction=" +
       (sw.direction > 0 ? "increasing"
                         : (sw.direction < 0 ? "decreasing" : "constant")) +
       "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Equilibrium JSON artifacts (emitted by `ce`/`nash`, re-read by `verify`)
// ---------------------------------------------------------------------------

inline std::string equilibrium_json(const EquilibriumOutcome& eq) {
  nlohmann::json doc;
  doc["kind"] = eq.kind;
  doc["q"] = std::vector<double>(eq.dispatch.q.data(),
                                 eq.dispatch.q.data() + eq.dispatch.q.size());
  doc["p"] = std::vector<double>(eq.dispatch.p.data(),
                                 eq.dispatch.p.data() + eq.dispatch.p.size());
  doc["x"] = std::vector<double>(eq.dispatch.x.data(),
                                 eq.dispatch.x.data() + eq.dispatch.x.size());
  doc["theta"] = std::vector<double>(eq.theta.data(),
                                     eq.theta.data() + eq.theta.size());
  doc["payoffs"] = std::vector<double>(eq.payoffs.data(),
                                       eq.payoffs.data() + eq.payoffs.size());
  doc["iso_payoff"] = eq.iso_payoff;
  doc["verified"] = eq.verified;
  doc["max_deviation_gain"] = eq.max_deviation_gain;
  doc["iso_optimal"] = eq.iso_optimal;
  if (!eq.note.empty()) doc["note"] = eq.note;
  return doc.dump(2) + "\n";
}

struct EquilibriumFile {
  std::string kind;
  Eigen::VectorXd q;
  Eigen::VectorXd theta;
};

inline EquilibriumFile parse_equilibrium_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid equilibrium json: ") + e.what());
  }
  if (!doc.is_object())
    throw InputError("equilibrium json: top level must be an object");
  EquilibriumFile out;
  out.kind = doc.contains("kind") ? doc["kind"].get<std::string>() : "nash";
  out.q = detail::json_vector(detail::json_field(doc, "q"), "q");
  out.theta = detail::json_vector(detail::json_field(doc, "theta"), "theta");
  return out;
}

inline std::string poa_instance_json(const UnboundedPoaInstance& inst,
                                     bool verified, double max_gain) {
  nlohmann::json doc;
  doc["beta"] = inst.beta;
  doc["price"] = inst.price;
  doc["poa_lower_bound"] = inst.poa_lower_bound;
  doc["q"] = std::vector<double>(inst.q.data(), inst.q.data() + inst.q.size());
  doc["theta"] = std::vector<double>(inst.theta.data(),
                                     inst.theta.data() + inst.theta.size());
  doc["x"] = std::vector<double>(inst.x.data(), inst.x.data() + inst.x.size());
  doc["demand"] = std::vector<double>(
      inst.net.demand.data(), inst.net.demand.data() + inst.net.demand.size());
  doc["line_capacity"] = inst.net.line_capacity[0];
  doc["verified"] = verified;
  doc["max_deviation_gain"] = max_gain;
  return doc.dump(2) + "\n";
}

}  // namespace sfe
