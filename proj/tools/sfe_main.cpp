// Command-line front end: scenario ingestion, command dispatch, and
// deterministic artifact emission.  Exit codes: 0 success, 1 infeasible or
// refused, 2 input error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sfe/sfe.hpp"

namespace {

void emit(const std::string& out_path, const std::string& bytes) {
  if (out_path.empty())
    std::cout << bytes;
  else
    sfe::write_file_atomic(out_path, bytes);
}

struct CommonFlags {
  std::string scenario_path;
  std::string out_path;
  double tol_feas = 1e-8;
  double tol_kkt = 1e-7;
  double eps_nash = 1e-6;

  sfe::SolveOptions options() const {
    sfe::SolveOptions opt;
    opt.tol_primal = tol_feas;
    opt.tol_station = tol_kkt;
    opt.tol_comp = tol_feas;
    return opt;
  }
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_scenario = true) {
  if (with_scenario)
    cmd->add_option("scenario", f.scenario_path, "scenario JSON file")
        ->required();
  cmd->add_option("--out", f.out_path, "output file (default: stdout)");
  cmd->add_option("--tol-feas", f.tol_feas, "primal feasibility tolerance");
  cmd->add_option("--tol-kkt", f.tol_kkt, "stationarity tolerance");
  cmd->add_option("--eps-nash", f.eps_nash, "equilibrium verification slack");
}

int run(int argc, char** argv) {
  CLI::App app{"supply-function equilibrium toolkit for DC power networks"};
  app.require_subcommand(1);

  CommonFlags dispatch_f, ce_f, nash_f, indices_f, verify_f;
  std::string nash_eq_out, ce_eq_out, verify_eq_path;

  CLI::App* cmd_dispatch = app.add_subcommand(
      "dispatch", "efficient or reported dispatch (reported when the "
                  "scenario carries bids)");
  add_common(cmd_dispatch, dispatch_f);

  CLI::App* cmd_ce =
      app.add_subcommand("ce", "competitive equilibrium of the scenario");
  add_common(cmd_ce, ce_f);
  cmd_ce->add_option("--eq-out", ce_eq_out, "equilibrium JSON artifact");

  CLI::App* cmd_nash =
      app.add_subcommand("nash", "Nash equilibrium of the bidding game");
  add_common(cmd_nash, nash_f);
  cmd_nash->add_option("--eq-out", nash_eq_out, "equilibrium JSON artifact");

  CLI::App* cmd_indices =
      app.add_subcommand("indices", "market-power indices of the scenario");
  add_common(cmd_indices, indices_f);

  CLI::App* cmd_verify = app.add_subcommand(
      "verify", "re-check a previously emitted equilibrium file");
  add_common(cmd_verify, verify_f);
  cmd_verify->add_option("--eq", verify_eq_path, "equilibrium JSON file")
      ->required();

  // Two-node capacity sweep; defaults reproduce the reference scenario.
  sfe::TwoNodeScenario tn{3, 10, 1.02, 1.02, 1.0, 1.15, 1.0, 1.0};
  double c_min = 0.0, c_max = 0.8, c_step = 0.0;
  std::string braess_out;
  CLI::App* cmd_braess = app.add_subcommand(
      "braess", "two-node line-capacity sweep with paradox flags");
  cmd_braess->add_option("--n1", tn.n1, "producers at node 1");
  cmd_braess->add_option("--n2", tn.n2, "producers at node 2");
  cmd_braess->add_option("--k1", tn.k1, "per-producer capacity at node 1");
  cmd_braess->add_option("--k2", tn.k2, "per-producer capacity at node 2");
  cmd_braess->add_option("--beta1", tn.beta1, "node-1 marginal cost");
  cmd_braess->add_option("--beta2", tn.beta2, "node-2 marginal cost");
  cmd_braess->add_option("--d1", tn.d1, "node-1 demand");
  cmd_braess->add_option("--d2", tn.d2, "node-2 demand");
  cmd_braess->add_option("--c-min", c_min, "sweep start");
  cmd_braess->add_option("--c-max", c_max, "sweep end");
  cmd_braess->add_option("--c-step", c_step,
                         "sweep step (default: 1% of total demand)");
  cmd_braess->add_option("--out", braess_out, "output file (default: stdout)");

  std::string envelope_in, envelope_out;
  double envelope_tol = 1e-9;
  CLI::App* cmd_envelope = app.add_subcommand(
      "envelope", "screen observed prices against the markup envelope");
  cmd_envelope->add_option("input", envelope_in, "CSV with header rsi,price[,mc][,ms]")
      ->required();
  cmd_envelope->add_option("--out", envelope_out, "output file (default: stdout)");
  cmd_envelope->add_option("--tol", envelope_tol, "flagging tolerance");

  int poa_n1 = 2, poa_n2 = 2;
  double poa_k1 = 1.5, poa_k2 = 4.0, poa_d = 2.0, poa_t = 1.2;
  double poa_eps = 1e-6;
  std::string poa_out;
  CLI::App* cmd_poa = app.add_subcommand(
      "poa-example", "two-node family with unbounded efficiency loss");
  cmd_poa->add_option("--n1", poa_n1, "producers at node 1");
  cmd_poa->add_option("--n2", poa_n2, "producers at node 2");
  cmd_poa->add_option("--k1", poa_k1, "per-producer capacity at node 1");
  cmd_poa->add_option("--k2", poa_k2, "per-producer capacity at node 2");
  cmd_poa->add_option("--d", poa_d, "total demand");
  cmd_poa->add_option("--t", poa_t, "node-1 equilibrium supply");
  cmd_poa->add_option("--eps-nash", poa_eps, "equilibrium verification slack");
  cmd_poa->add_option("--out", poa_out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (cmd_dispatch->parsed()) {
    sfe::Scenario sc = sfe::load_scenario(dispatch_f.scenario_path);
    sfe::DispatchOutcome out =
        sc.has_bids
            ? sfe::reported_dispatch(sc.net, sc.producers, sc.bids,
                                     dispatch_f.options())
            : sfe::efficient_dispatch(sc.net, sc.producers, dispatch_f.options());
    emit(dispatch_f.out_path, sfe::dispatch_csv(sc.net, sc.producers, out));
    return 0;
  }

  if (cmd_ce->parsed() || cmd_nash->parsed()) {
    const CommonFlags& f = cmd_ce->parsed() ? ce_f : nash_f;
    const std::string& eq_out = cmd_ce->parsed() ? ce_eq_out : nash_eq_out;
    sfe::Scenario sc = sfe::load_scenario(f.scenario_path);
    sfe::EquilibriumOutcome eq =
        cmd_ce->parsed()
            ? sfe::competitive_equilibrium(sc.net, sc.producers, f.options(),
                                           f.eps_nash)
            : sfe::nash_equilibrium(sc.net, sc.producers, f.options(),
                                    f.eps_nash);
    emit(f.out_path, sfe::equilibrium_csv(sc.net, sc.producers, eq));
    if (!eq_out.empty())
      sfe::write_file_atomic(eq_out, sfe::equilibrium_json(eq));
    return 0;
  }

  if (cmd_indices->parsed()) {
    sfe::Scenario sc = sfe::load_scenario(indices_f.scenario_path);
    sfe::IndexReport rep = sfe::build_index_report(sc.net, sc.producers);
    emit(indices_f.out_path, sfe::index_csv(rep));
    return 0;
  }

  if (cmd_verify->parsed()) {
    sfe::Scenario sc = sfe::load_scenario(verify_f.scenario_path);
    sfe::EquilibriumFile eq =
        sfe::parse_equilibrium_json(sfe::read_file(verify_eq_path));
    if (eq.q.size() != sc.net.node_count ||
        eq.theta.size() != static_cast<int>(sc.producers.size()))
      throw sfe::InputError("equilibrium file does not match the scenario");
    if (eq.kind == "competitive") {
      sfe::EquilibriumOutcome ce = sfe::competitive_equilibrium(
          sc.net, sc.producers, verify_f.options(), verify_f.eps_nash);
      double dq = (ce.dispatch.q - eq.q).cwiseAbs().maxCoeff();
      bool ok = ce.verified && dq <= 1e-6;
      std::cout << "kind=competitive verified=" << (ok ? 1 : 0)
                << " max_deviation_gain="
                << sfe::format_number(ce.max_deviation_gain) << "\n";
      return ok ? 0 : 1;
    }
    sfe::NashVerification ver =
        sfe::verify_nash(sc.net, sc.producers, eq.q, eq.theta,
                         verify_f.eps_nash, verify_f.options());
    bool ok = ver.producers_ok && ver.iso_optimal;
    std::cout << "kind=nash verified=" << (ok ? 1 : 0) << " max_deviation_gain="
              << sfe::format_number(ver.max_deviation_gain)
              << " iso_optimal=" << (ver.iso_optimal ? 1 : 0) << "\n";
    return ok ? 0 : 1;
  }

  if (cmd_braess->parsed()) {
    sfe::SweepResult sw = sfe::capacity_sweep(tn, c_min, c_max, c_step);
    emit(braess_out, sfe::sweep_csv(sw));
    return 0;
  }

  if (cmd_envelope->parsed()) {
    std::vector<sfe::EnvelopeRow> rows =
        sfe::parse_envelope_csv(sfe::read_file(envelope_in));
    emit(envelope_out, sfe::envelope_csv(sfe::envelope_check(rows, envelope_tol)));
    return 0;
  }

  if (cmd_poa->parsed()) {
    sfe::UnboundedPoaInstance inst =
        sfe::unbounded_poa_instance(poa_n1, poa_n2, poa_k1, poa_k2, poa_d, poa_t);
    sfe::NashVerification ver = sfe::verify_nash(
        inst.net, inst.producers, inst.q, inst.theta, poa_eps);
    emit(poa_out,
         sfe::poa_instance_json(inst, ver.producers_ok && ver.iso_optimal,
                                ver.max_deviation_gain));
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const sfe::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const sfe::Refusal& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
