#include "pintoc/pfasst.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace pintoc {

Hierarchy::Hierarchy(std::vector<LevelSpec> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("hierarchy: needs at least one level");
  for (const auto& l : levels_) {
    validate_grid(l.grid);
    if (l.sweeps_per_visit < 1) throw std::invalid_argument("hierarchy: sweeps_per_visit must be >= 1");
  }
  for (int l = 1; l < num_levels(); ++l) {
    const auto& coarse = levels_[l - 1];
    const auto& fine = levels_[l];
    if (coarse.rule.num_nodes > fine.rule.num_nodes)
      throw std::invalid_argument("hierarchy: node counts must be non-increasing toward coarse levels");
    for (int d = 0; d < fine.grid.dims; ++d)
      if (coarse.grid.points[d] > fine.grid.points[d])
        throw std::invalid_argument("hierarchy: resolution must be non-increasing toward coarse levels");
    restrict_.push_back(node_restriction_matrix(fine.rule, coarse.rule));
    interp_.push_back(node_interpolation_matrix(fine.rule, coarse.rule));
  }
}

void validate_decomposition(const TimeDecomposition& td) {
  if (td.num_steps < 1 || td.num_workers < 1)
    throw std::invalid_argument("decomposition: steps and workers must be positive");
  if (td.num_steps % td.num_workers != 0)
    throw std::invalid_argument("decomposition: num_steps must be a multiple of num_workers");
  if (td.dt <= 0.0) throw std::invalid_argument("decomposition: dt must be positive");
}

bool SolveReport::all_converged() const {
  for (const auto& s : steps)
    if (!s.converged) return false;
  return true;
}

long SolveReport::total_sweeps() const {
  long n = 0;
  for (const auto& s : steps)
    for (int c : s.sweeps) n += c;
  return n;
}

long SolveReport::total_fine_sweeps() const {
  long n = 0;
  for (const auto& s : steps)
    if (!s.sweeps.empty()) n += s.sweeps.back();
  return n;
}

double SolveReport::mean_iterations() const {
  if (steps.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : steps) acc += s.iterations;
  return acc / steps.size();
}

void SolveReport::write_csv(std::ostream& os) const {
  os << "step,level,sweeps,final_residual,converged\n";
  for (const auto& s : steps)
    for (size_t l = 0; l < s.sweeps.size(); ++l)
      os << s.step << ',' << l << ',' << s.sweeps[l] << ',' << s.final_residual << ','
         << (s.converged ? 1 : 0) << '\n';
}

bool residual_test(double resid, double y0_norm, double abs_tol, double rel_tol) {
  if (!std::isfinite(resid)) return false;
  return resid < abs_tol || resid < rel_tol * y0_norm;
}

bool convergence_rule(double resid, double y0_norm, bool predecessor_converged, double abs_tol,
                      double rel_tol) {
  return residual_test(resid, y0_norm, abs_tol, rel_tol) && predecessor_converged;
}

// ---------------------------------------------------------------------------
// Tagged point-to-point channels (in-process backend). Messages are matched
// by (block, kind, level, iter) so results are independent of scheduling. A
// worker that stops iterating posts a sticky final value per (block, level);
// any later receive on that edge is satisfied by it, which is how converged
// steps keep forwarding their final value.
// ---------------------------------------------------------------------------

namespace {

constexpr int kPredictor = 0;
constexpr int kValue = 1;
constexpr int kHandoff = 2;

using MsgTag = std::tuple<int, int, int, int>;  // block, kind, level, iter

struct Message {
  SpatialField field;
  bool flag = false;
};

class Mailbox {
 public:
  void put(MsgTag tag, Message msg) {
    {
      std::lock_guard<std::mutex> lock(m_);
      box_.emplace(tag, std::move(msg));
    }
    cv_.notify_all();
  }

  void put_final(int block, int level, Message msg) {
    {
      std::lock_guard<std::mutex> lock(m_);
      finals_[{block, level}] = std::move(msg);
    }
    cv_.notify_all();
  }

  // Blocking receive: an exact tag match wins, otherwise the sender's sticky
  // final for this (block, level). Exact messages are consumed.
  Message take(MsgTag tag) {
    std::unique_lock<std::mutex> lock(m_);
    const std::pair<int, int> fkey{std::get<0>(tag), std::get<2>(tag)};
    cv_.wait(lock, [&] { return aborted_ || box_.count(tag) > 0 || finals_.count(fkey) > 0; });
    if (aborted_) throw std::runtime_error("pfasst: solve aborted by worker failure");
    auto it = box_.find(tag);
    if (it != box_.end()) {
      Message m = std::move(it->second);
      box_.erase(it);
      return m;
    }
    return finals_.at(fkey);
  }

  void abort() {
    {
      std::lock_guard<std::mutex> lock(m_);
      aborted_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::map<MsgTag, Message> box_;
  std::map<std::pair<int, int>, Message> finals_;
  bool aborted_ = false;
};

class Network {
 public:
  explicit Network(int workers)
      : fwd_(std::max(workers - 1, 0)), bwd_(std::max(workers - 1, 0)) {}

  Mailbox& forward_into(int w) { return fwd_.at(w - 1); }   // edge (w-1) -> w
  Mailbox& backward_into(int w) { return bwd_.at(w); }      // edge (w+1) -> w
  Mailbox& wrap() { return wrap_; }                         // last -> first (handoff)

  void abort_all() {
    for (auto& b : fwd_) b.abort();
    for (auto& b : bwd_) b.abort();
    wrap_.abort();
  }

 private:
  std::vector<Mailbox> fwd_;
  std::vector<Mailbox> bwd_;
  Mailbox wrap_;
};

// One worker's endpoints for one sweep direction.
struct CommHooks {
  bool has_predecessor = false;
  Mailbox* in = nullptr;   // receive side (owned by me)
  Mailbox* out = nullptr;  // send side (owned by my successor); null at the end
  int block = 0;

  Message recv(int kind, int level, int iter) const { return in->take({block, kind, level, iter}); }
  void send(int kind, int level, int iter, const SpatialField& f, bool flag) const {
    if (out != nullptr) out->put({block, kind, level, iter}, Message{f, flag});
  }
  void send_final(int level, const SpatialField& f, bool flag) const {
    if (out != nullptr) out->put_final(block, level, Message{f, flag});
  }
};

CommHooks make_hooks(Network* net, int block, int w, int r, bool reflected) {
  CommHooks h;
  h.block = block;
  if (net == nullptr || r == 1) return h;
  if (!reflected) {
    h.has_predecessor = w > 0;
    h.in = w > 0 ? &net->forward_into(w) : nullptr;
    h.out = w < r - 1 ? &net->forward_into(w + 1) : nullptr;
  } else {
    h.has_predecessor = w < r - 1;
    h.in = w < r - 1 ? &net->backward_into(w) : nullptr;
    h.out = w > 0 ? &net->backward_into(w - 1) : nullptr;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Per-step solver state over all levels.
// ---------------------------------------------------------------------------

struct StepSlot {
  int step = 0;
  double t0 = 0.0;
  double dt = 0.0;
  const StepRhsStack* rhs = nullptr;
  std::vector<NodeTrajectory> lv;                 // coarse..fine
  std::vector<std::vector<SpatialField>> saved;   // per coarse level: restricted node values
  StepStatus status = StepStatus::iterating;
  StepReport rep;
  double fine_resid = std::numeric_limits<double>::infinity();
  bool pred_converged_seen = false;
};

const StepRhs& rhs_at(const StepSlot& s, int level) { return (*s.rhs)[level]; }

void sweep_level(StepSlot& s, const Hierarchy& h, int l) {
  for (int k = 0; k < h.level(l).sweeps_per_visit; ++k) {
    sweep(s.lv[l], h.level(l).rule, rhs_at(s, l), s.dt, h.level(l).sweeper);
    s.rep.sweeps[l] += 1;
  }
}

// Space-time restriction of node values from level l to l-1, consistent
// f evaluation, FAS tau, and the saved copy used by the coarse-grid
// correction.
void restrict_with_fas(StepSlot& s, const Hierarchy& h, int l) {
  const auto& rt = h.restrict_nodes(l);
  const GridSpec& cg = h.level(l - 1).grid;
  auto cy = apply_node_matrix(rt, s.lv[l].y);
  for (auto& f : cy) f = transfer(f, cg);
  NodeTrajectory& coarse = s.lv[l - 1];
  coarse.step_index = s.step;
  coarse.t0 = s.t0;
  coarse.t1 = s.t0 + s.dt;
  coarse.y = cy;
  coarse.f_lin.assign(cy.size(), SpatialField(cg));
  if (rhs_at(s, l - 1).reaction.present())
    coarse.f_react.assign(cy.size(), SpatialField(cg));
  else
    coarse.f_react.clear();
  evaluate_rhs(coarse, rhs_at(s, l - 1));
  coarse.tau = fas_tau(s.lv[l], rhs_at(s, l), h.level(l).rule, coarse, rhs_at(s, l - 1),
                       h.level(l - 1).rule, rt, cg, s.dt);
  s.saved[l - 1] = std::move(cy);
}

// Coarse-grid correction: interpolate the coarse increment over the saved
// restricted values onto level l (all nodes, including node 0).
void cgc_up(StepSlot& s, const Hierarchy& h, int l) {
  const auto& pt = h.interp_nodes(l);
  const NodeTrajectory& coarse = s.lv[l - 1];
  std::vector<SpatialField> delta;
  delta.reserve(coarse.y.size());
  for (size_t m = 0; m < coarse.y.size(); ++m) delta.push_back(coarse.y[m] - s.saved[l - 1][m]);
  auto delta_f = apply_node_matrix(pt, delta);
  const GridSpec& fg = h.level(l).grid;
  for (size_t m = 0; m < delta_f.size(); ++m) s.lv[l].y[m] += transfer(delta_f[m], fg);
}

StepSlot make_slot(const Hierarchy& h, int step, double t0, double dt, const StepRhsStack& rhs) {
  StepSlot s;
  s.step = step;
  s.t0 = t0;
  s.dt = dt;
  s.rhs = &rhs;
  s.lv.resize(h.num_levels());
  s.saved.resize(std::max(h.num_levels() - 1, 0));
  s.rep.step = step;
  s.rep.sweeps.assign(h.num_levels(), 0);
  return s;
}

// Build finer levels by plain interpolation of a freshly swept coarse level
// (cold predictor path on workers without an exact initial value).
void interpolate_all_up(StepSlot& s, const Hierarchy& h) {
  for (int l = 1; l <= h.finest(); ++l) {
    auto vals = apply_node_matrix(h.interp_nodes(l), s.lv[l - 1].y);
    const GridSpec& fg = h.level(l).grid;
    NodeTrajectory traj;
    traj.step_index = s.step;
    traj.t0 = s.t0;
    traj.t1 = s.t0 + s.dt;
    traj.y.clear();
    for (auto& v : vals) traj.y.push_back(transfer(v, fg));
    traj.f_lin.assign(traj.y.size(), SpatialField(fg));
    if (rhs_at(s, l).reaction.present()) traj.f_react.assign(traj.y.size(), SpatialField(fg));
    s.lv[l] = std::move(traj);
    evaluate_rhs(s.lv[l], rhs_at(s, l));
  }
}

// Predictor. Cold: spread the initial value (worker 0) or the received
// coarse value, one coarse sweep pass with forward communication, values
// interpolated up. Warm: load the stored fine nodes, restrict with FAS,
// coarse sweep pass with communication, corrections interpolated up.
void run_predictor(StepSlot& s, const Hierarchy& h, const CommHooks& hooks,
                   const SpatialField* exact_y0, const std::vector<SpatialField>* warm_nodes) {
  const int fin = h.finest();
  const bool warm = warm_nodes != nullptr && !warm_nodes->empty();

  if (warm) {
    NodeTrajectory& fine = s.lv[fin];
    fine.step_index = s.step;
    fine.t0 = s.t0;
    fine.t1 = s.t0 + s.dt;
    fine.y = *warm_nodes;
    if (exact_y0 != nullptr) fine.y[0] = *exact_y0;
    const GridSpec& fg = h.level(fin).grid;
    fine.f_lin.assign(fine.y.size(), SpatialField(fg));
    if (rhs_at(s, fin).reaction.present()) fine.f_react.assign(fine.y.size(), SpatialField(fg));
    evaluate_rhs(fine, rhs_at(s, fin));
    for (int l = fin; l >= 1; --l) restrict_with_fas(s, h, l);
    if (hooks.has_predecessor) {
      Message m = hooks.recv(kPredictor, 0, 0);
      set_initial_value(s.lv[0], rhs_at(s, 0), m.field);
    }
    sweep_level(s, h, 0);
    hooks.send(kPredictor, 0, 0, s.lv[0].y.back(), false);
    for (int l = 1; l <= fin; ++l) {
      cgc_up(s, h, l);
      evaluate_rhs(s.lv[l], rhs_at(s, l));
    }
    return;
  }

  if (exact_y0 != nullptr) {
    s.lv[fin] = make_trajectory(s.step, s.t0, s.dt, h.level(fin).rule, rhs_at(s, fin), *exact_y0);
    for (int l = fin; l >= 1; --l) restrict_with_fas(s, h, l);
    sweep_level(s, h, 0);
    hooks.send(kPredictor, 0, 0, s.lv[0].y.back(), false);
    if (fin > 0) {
      for (int l = 1; l <= fin; ++l) {
        cgc_up(s, h, l);
        evaluate_rhs(s.lv[l], rhs_at(s, l));
      }
    }
  } else {
    Message m = hooks.recv(kPredictor, 0, 0);
    s.lv[0] = make_trajectory(s.step, s.t0, s.dt, h.level(0).rule, rhs_at(s, 0), m.field);
    sweep_level(s, h, 0);
    hooks.send(kPredictor, 0, 0, s.lv[0].y.back(), false);
    interpolate_all_up(s, h);
  }
}

// One PFASST/MLSDC iteration (V-cycle with communication). Returns the
// step's convergence status after this iteration.
bool pfasst_iteration(StepSlot& s, const Hierarchy& h, const SolveOptions& opts, const CommHooks& hooks,
                      int iter) {
  const int fin = h.finest();
  s.rep.iterations += 1;

  bool pred_ok = !hooks.has_predecessor;

  if (h.num_levels() == 1) {
    if (hooks.has_predecessor) {
      Message m = hooks.recv(kValue, 0, iter);
      pred_ok = m.flag;
      set_initial_value(s.lv[0], rhs_at(s, 0), m.field);
    }
    sweep_level(s, h, 0);
    s.fine_resid = s.lv[0].residual_norm;
    s.rep.final_residual = s.fine_resid;
    const double y0n = l2_norm(s.lv[0].y[0]);
    if (!std::isfinite(s.fine_resid) || s.fine_resid > 1e8 * (1.0 + y0n)) {
      s.status = StepStatus::diverged;
      hooks.send(kValue, 0, iter, s.lv[0].y.back(), false);
      return false;
    }
    const bool conv = convergence_rule(s.fine_resid, y0n, pred_ok, opts.abs_tol, opts.rel_tol);
    hooks.send(kValue, 0, iter, s.lv[0].y.back(), conv);
    if (conv) s.status = StepStatus::converged;
    return conv;
  }

  // Down: sweep, send step-end value, restrict with FAS.
  for (int l = fin; l >= 1; --l) {
    sweep_level(s, h, l);
    if (l == fin) {
      s.fine_resid = s.lv[fin].residual_norm;
      s.rep.final_residual = s.fine_resid;
      const double y0n = l2_norm(s.lv[fin].y[0]);
      if (!std::isfinite(s.fine_resid) || s.fine_resid > 1e8 * (1.0 + y0n)) {
        s.status = StepStatus::diverged;
        return false;
      }
    }
    hooks.send(kValue, l, iter, s.lv[l].y.back(), false);
    restrict_with_fas(s, h, l);
  }

  // Coarsest: blocking receive of the new initial value and the
  // predecessor's status, sweep, synchronous send.
  if (hooks.has_predecessor) {
    Message m = hooks.recv(kValue, 0, iter);
    pred_ok = m.flag;
    set_initial_value(s.lv[0], rhs_at(s, 0), m.field);
  }
  sweep_level(s, h, 0);
  const double y0n = l2_norm(s.lv[fin].y[0]);
  const bool conv = convergence_rule(s.fine_resid, y0n, pred_ok, opts.abs_tol, opts.rel_tol);
  hooks.send(kValue, 0, iter, s.lv[0].y.back(), conv);

  // Up: coarse-grid correction, receive the overlapped initial value,
  // re-evaluate, sweep intermediate levels.
  for (int l = 1; l <= fin; ++l) {
    cgc_up(s, h, l);
    if (hooks.has_predecessor) {
      Message m = hooks.recv(kValue, l, iter);
      s.lv[l].y[0] = m.field;
    }
    evaluate_rhs(s.lv[l], rhs_at(s, l));
    if (l < fin) sweep_level(s, h, l);
  }

  if (conv) s.status = StepStatus::converged;
  return conv;
}

void finalize_step(StepSlot& s, const Hierarchy& h, const CommHooks& hooks, int max_iters) {
  if (s.status == StepStatus::iterating) s.status = StepStatus::maxed_out;
  s.rep.converged = s.status == StepStatus::converged;
  const bool flag = s.rep.converged;
  for (int l = 0; l <= h.finest(); ++l) hooks.send_final(l, s.lv[l].y.back(), flag);
  (void)max_iters;
}

}  // namespace

// ---------------------------------------------------------------------------
// Controllers.
// ---------------------------------------------------------------------------

namespace {

struct WorkerShared {
  const Hierarchy* h;
  const TimeDecomposition* td;
  const std::vector<StepRhsStack>* rhs;
  const SolveOptions* opts;
  const SpatialField* y_init;
  Network* net;
  std::vector<NodeTrajectory>* out_traj;
  std::vector<StepReport>* out_rep;
};

void standard_worker(const WorkerShared& ws, int w) {
  const Hierarchy& h = *ws.h;
  const TimeDecomposition& td = *ws.td;
  const int r = td.num_workers;
  const int fin = h.finest();
  SpatialField local_handoff;  // chains blocks when R == 1

  for (int b = 0; b < td.num_blocks(); ++b) {
    const int step = b * r + w;
    CommHooks hooks = make_hooks(ws.net, b, w, r, false);

    SpatialField y0;
    const SpatialField* y0_ptr = nullptr;
    if (w == 0) {
      if (b == 0)
        y0 = *ws.y_init;
      else if (r == 1)
        y0 = local_handoff;
      else
        y0 = ws.net->wrap().take({b, kHandoff, 0, 0}).field;
      y0_ptr = &y0;
    }

    StepSlot slot = make_slot(h, step, td.step_t0(step), td.dt, (*ws.rhs)[step]);
    const std::vector<SpatialField>* warm_nodes = nullptr;
    if (ws.opts->warm != nullptr && ws.opts->warm->has(step)) warm_nodes = &ws.opts->warm->steps[step];
    run_predictor(slot, h, hooks, y0_ptr, warm_nodes);

    for (int k = 1; k <= ws.opts->max_iters; ++k) {
      if (pfasst_iteration(slot, h, *ws.opts, hooks, k)) break;
      if (slot.status == StepStatus::diverged) break;
    }
    finalize_step(slot, h, hooks, ws.opts->max_iters);

    if (w == r - 1) {
      if (r == 1)
        local_handoff = slot.lv[fin].y.back();
      else
        ws.net->wrap().put({b + 1, kHandoff, 0, 0}, Message{slot.lv[fin].y.back(), slot.rep.converged});
    }
    (*ws.out_traj)[step] = std::move(slot.lv[fin]);
    (*ws.out_rep)[step] = slot.rep;
  }
}

}  // namespace

PfasstResult pfasst_solve(const Hierarchy& h, const TimeDecomposition& td, const SpatialField& y_initial,
                          const std::vector<StepRhsStack>& rhs_per_step, const SolveOptions& opts) {
  validate_decomposition(td);
  if (static_cast<int>(rhs_per_step.size()) != td.num_steps)
    throw std::invalid_argument("pfasst_solve: need one StepRhsStack per step");
  for (const auto& stack : rhs_per_step)
    if (static_cast<int>(stack.size()) != h.num_levels())
      throw std::invalid_argument("pfasst_solve: StepRhsStack size must match the hierarchy");

  const auto t_begin = std::chrono::steady_clock::now();
  std::vector<NodeTrajectory> traj(td.num_steps);
  std::vector<StepReport> reps(td.num_steps);

  Network net(td.num_workers);
  WorkerShared ws{&h, &td, &rhs_per_step, &opts, &y_initial, &net, &traj, &reps};

  if (td.num_workers == 1) {
    standard_worker(ws, 0);
  } else {
    std::vector<std::thread> threads;
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < td.num_workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          standard_worker(ws, w);
        } catch (...) {
          {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (!first_error) first_error = std::current_exception();
          }
          net.abort_all();
        }
      });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  PfasstResult result;
  result.trajectories = std::move(traj);
  result.report.steps = std::move(reps);
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return result;
}

std::pair<NodeTrajectory, SolveReport> mlsdc_step(const Hierarchy& h, const SpatialField& y0,
                                                  const StepRhsStack& rhs, double t0, double dt,
                                                  const SolveOptions& opts,
                                                  const std::vector<SpatialField>* warm_nodes) {
  TimeDecomposition td;
  td.num_steps = 1;
  td.num_workers = 1;
  td.t_start = t0;
  td.dt = dt;
  SolveOptions local = opts;
  TrajectoryStore store;
  if (warm_nodes != nullptr && !warm_nodes->empty()) {
    store.steps.push_back(*warm_nodes);
    local.warm = &store;
  }
  auto res = pfasst_solve(h, td, y0, {rhs}, local);
  SolveReport rep = std::move(res.report);
  return {std::move(res.trajectories[0]), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Simultaneous forward/backward controller (R = N).
// ---------------------------------------------------------------------------

SimultaneousResult simultaneous_solve(const Hierarchy& h, const TimeDecomposition& td,
                                      const SpatialField& y_initial, const SimultaneousProblem& prob,
                                      const SolveOptions& opts) {
  validate_decomposition(td);
  if (td.num_workers != td.num_steps)
    throw std::invalid_argument("simultaneous_solve: requires R = N (one worker per step)");
  const int n = td.num_steps;
  if (static_cast<int>(prob.state_rhs->size()) != n)
    throw std::invalid_argument("simultaneous_solve: state rhs per step required");

  const auto t_begin = std::chrono::steady_clock::now();
  std::vector<NodeTrajectory> state_traj(n), adj_traj(n);
  std::vector<StepReport> state_rep(n), adj_rep(n);
  Network net(n);

  auto worker = [&](int w) {
    const int fin = h.finest();
    const int reflected = n - 1 - w;  // adjoint step over the same interval
    CommHooks fwd = make_hooks(&net, 0, w, n, false);
    CommHooks bwd = make_hooks(&net, 0, w, n, true);

    // State predictor.
    StepSlot st = make_slot(h, w, td.step_t0(w), td.dt, (*prob.state_rhs)[w]);
    const SpatialField* y0_ptr = (w == 0) ? &y_initial : nullptr;
    run_predictor(st, h, fwd, y0_ptr, nullptr);

    // Adjoint predictor: rhs built from the current state iterate; the
    // reflected-first worker (w = n-1) owns the true terminal value.
    StepRhsStack adj_rhs = prob.adjoint_rhs(reflected, st.lv[fin]);
    StepSlot ad = make_slot(h, reflected, td.t_start + reflected * td.dt, td.dt, adj_rhs);
    const SpatialField* p0_ptr = (w == n - 1) ? &prob.adjoint_initial : nullptr;
    run_predictor(ad, h, bwd, p0_ptr, nullptr);

    bool state_done = false, adj_done = false;
    for (int k = 1; k <= opts.max_iters; ++k) {
      const bool sc = pfasst_iteration(st, h, opts, fwd, k);
      if (st.status == StepStatus::diverged) break;
      // Refresh the adjoint data from the new state iterate; coefficients
      // and sources live in the rhs stack, so the slot keeps its pointer.
      adj_rhs = prob.adjoint_rhs(reflected, st.lv[fin]);
      ad.rhs = &adj_rhs;
      if (adj_rhs[fin].reaction.present())
        for (int l = 0; l <= fin; ++l) evaluate_rhs(ad.lv[l], adj_rhs[l]);
      const bool ac = pfasst_iteration(ad, h, opts, bwd, k);
      if (ad.status == StepStatus::diverged) break;
      state_done = sc;
      adj_done = ac;
      if (state_done && adj_done) break;
      // Joint convergence: a single passing equation keeps iterating.
      st.status = StepStatus::iterating;
      ad.status = StepStatus::iterating;
    }
    if (!(state_done && adj_done)) {
      st.status = st.status == StepStatus::diverged ? st.status : StepStatus::maxed_out;
      ad.status = ad.status == StepStatus::diverged ? ad.status : StepStatus::maxed_out;
    } else {
      st.status = StepStatus::converged;
      ad.status = StepStatus::converged;
    }
    finalize_step(st, h, fwd, opts.max_iters);
    finalize_step(ad, h, bwd, opts.max_iters);

    state_traj[w] = std::move(st.lv[fin]);
    state_rep[w] = st.rep;
    adj_traj[reflected] = std::move(ad.lv[fin]);
    adj_rep[reflected] = ad.rep;
  };

  std::vector<std::thread> threads;
  std::mutex err_mutex;
  std::exception_ptr first_error;
  for (int w = 0; w < n; ++w) {
    threads.emplace_back([&, w] {
      try {
        worker(w);
      } catch (...) {
        {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
        }
        net.abort_all();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  SimultaneousResult res;
  res.state = std::move(state_traj);
  res.adjoint = std::move(adj_traj);
  res.state_report.steps = std::move(state_rep);
  res.adjoint_report.steps = std::move(adj_rep);
  res.state_report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  res.adjoint_report.wall_seconds = res.state_report.wall_seconds;
  return res;
}

}  // namespace pintoc
