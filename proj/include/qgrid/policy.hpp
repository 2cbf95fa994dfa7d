#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qgrid/lang.hpp"
#include "qgrid/nn/modules.hpp"
#include "qgrid/nn/tape.hpp"
#include "qgrid/world.hpp"

namespace qgrid {

enum class Profile { Paper, Lite };

enum class AgentVariant {
  Full,           // notebook + pointer + exploration bonus
  NoQuery,        // physical actions only
  QueryBaseline,  // query heads bolted on, no notebook machinery
  NoNotebook,     // policy sees only instruction + last reply
  NoPointer,      // full-vocabulary query heads
  NoBonus,        // bonus scale forced to zero by the trainer
};

inline const char* profile_name(Profile p) {
  return p == Profile::Paper ? "paper" : "lite";
}
inline std::optional<Profile> profile_from_name(const std::string& s) {
  if (s == "paper") return Profile::Paper;
  if (s == "lite") return Profile::Lite;
  return std::nullopt;
}

inline const char* variant_name(AgentVariant v) {
  static const char* names[] = {"full",       "noquery",   "querybaseline",
                                "nonotebook", "nopointer", "nobonus"};
  return names[static_cast<int>(v)];
}
inline std::optional<AgentVariant> variant_from_name(const std::string& s) {
  for (int i = 0; i < 6; ++i)
    if (s == variant_name(static_cast<AgentVariant>(i)))
      return static_cast<AgentVariant>(i);
  return std::nullopt;
}

inline bool variant_has_query_heads(AgentVariant v) {
  return v != AgentVariant::NoQuery;
}
inline bool variant_uses_pointer(AgentVariant v) {
  return v == AgentVariant::Full || v == AgentVariant::NoNotebook ||
         v == AgentVariant::NoBonus;
}
inline bool variant_uses_notebook(AgentVariant v) {
  return v == AgentVariant::Full || v == AgentVariant::NoPointer ||
         v == AgentVariant::NoBonus;
}

struct PolicyConfig {
  Profile profile = Profile::Lite;
  AgentVariant variant = AgentVariant::Full;
  int hidden = 64;  // encoding size l
  int head_hidden = 64;
  uint64_t init_seed = 1;
};

inline int default_hidden(Profile p) { return p == Profile::Paper ? 128 : 64; }

// The agent network. One class covers both profiles:
//   lite  - cell-embedding + MLP observation encoder, bag-of-embedding
//           notes, gated-concat GRU aggregator
//   paper - 3-layer conv observation encoder, GRU note encoder,
//           FiLM-conditioned LSTM aggregator
// plus five heads; adjective/noun heads are pointers over the note words
// unless the variant asks for plain vocabulary heads.
class PolicyNet {
 public:
  static constexpr int kCellEmb = 8;

  PolicyNet(PolicyConfig cfg, const Vocabulary& vocab)
      : cfg_(cfg), vocab_(&vocab) {
    Rng rng(cfg.init_seed);
    int l = cfg_.hidden;
    int n_words = static_cast<int>(vocab.ordered_words().size());
    emb_ = store_.add_xavier("emb", n_words, l, rng);

    if (cfg_.profile == Profile::Lite) {
      type_emb_ = store_.add_normal("obs.type_emb", kNumObjTypes, kCellEmb,
                                    0.3, rng);
      color_emb_ = store_.add_normal("obs.color_emb", kNumColors, kCellEmb,
                                     0.3, rng);
      state_emb_ = store_.add_normal("obs.state_emb", kNumObjStates, kCellEmb,
                                     0.3, rng);
      obs1_ = Linear(store_, "obs.fc1", 49 * kCellEmb + 4, l, rng);
      obs2_ = Linear(store_, "obs.fc2", l, l, rng);
      agg_gate_ = Linear(store_, "agg.gate", l, l, rng);
      agg_gru_ = GruCell(store_, "agg.gru", 3 * l, l, rng);
    } else {
      conv1_ = Conv2d(store_, "obs.conv1", kOneHot, l, 2, 0, rng);
      conv2_ = Conv2d(store_, "obs.conv2", l, l, 3, 1, rng);
      conv3_ = Conv2d(store_, "obs.conv3", l, l, 3, 1, rng);
      obs1_ = Linear(store_, "obs.fc", 9 * l + 4, l, rng);
      note_gru_ = GruCell(store_, "note.gru", l, l, rng);
      film1_ = Linear(store_, "agg.film1", l, 2 * l, rng);
      film2_ = Linear(store_, "agg.film2", l, 2 * l, rng);
      film1_w_ = Linear(store_, "agg.film1w", l, l, rng);
      film2_w_ = Linear(store_, "agg.film2w", l, l, rng);
      agg_lstm_ = LstmCell(store_, "agg.lstm", l, l, rng);
      // start FiLM as identity modulation
      for (int i = 0; i < l; ++i) {
        store_.at(film1_.b).value(0, i) = 1.0;
        store_.at(film2_.b).value(0, i) = 1.0;
      }
    }

    set_phi_ = Linear(store_, "set.phi", l, l, rng);
    set_rho_ = Linear(store_, "set.rho", l, l, rng);

    int hh = cfg_.head_hidden;
    phy_head_ = Mlp2(store_, "head.phy", l, hh, kNumPhysicalActions, rng);
    value_head_ = Mlp2(store_, "head.value", l, hh, 1, rng);
    if (variant_has_query_heads(cfg_.variant)) {
      switch_head_ = Mlp2(store_, "head.switch", l, hh, 2, rng);
      func_head_ = Mlp2(store_, "head.func", l, hh,
                        static_cast<int>(vocab.func_words.size()), rng);
      if (variant_uses_pointer(cfg_.variant)) {
        adj_wq_ = store_.add_xavier("ptr.adj.wq", l, l, rng);
        adj_wk_ = store_.add_xavier("ptr.adj.wk", l, l, rng);
        noun_wq_ = store_.add_xavier("ptr.noun.wq", l, l, rng);
        noun_wk_ = store_.add_xavier("ptr.noun.wk", l, l, rng);
      } else {
        adj_head_ = Mlp2(store_, "head.adj", l, hh,
                         static_cast<int>(vocab.adjectives.size()), rng);
        noun_head_ = Mlp2(store_, "head.noun", l, hh,
                          static_cast<int>(vocab.nouns.size()), rng);
      }
    }
  }

  const PolicyConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return *vocab_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  int state_size() const {
    return cfg_.profile == Profile::Paper ? 2 * cfg_.hidden : cfg_.hidden;
  }

  struct SampleInput {
    const View* view = nullptr;
    std::vector<std::vector<int>> notes;  // token ids, insertion order
  };

  struct PointerSlot {
    bool fallback = true;        // no slot word among the notes
    nn::Tape::Var cand_logp = -1;  // m x 1 log-probs per candidate
    std::vector<int> cand_words;   // m slot-vocabulary indices
    nn::Tape::Var word_logp = -1;  // k x 1 log-probs of distinct words
    std::vector<int> words;        // k distinct indices, first-seen order
  };

  struct StepOut {
    int batch = 0;
    nn::Tape::Var switch_lp = -1;
    nn::Tape::Var phy_lp = -1;
    nn::Tape::Var func_lp = -1;
    nn::Tape::Var adj_lp_full = -1;   // plain-head variants
    nn::Tape::Var noun_lp_full = -1;
    std::vector<PointerSlot> adj, noun;
    nn::Tape::Var value = -1;
    nn::Tape::Var state = -1;
  };

  // One batched policy step. `state` must be batch x state_size; the caller
  // threads it across time and zeroes rows at episode starts.
  StepOut forward(nn::Tape& t, const std::vector<SampleInput>& batch,
                  nn::Tape::Var state) const {
    int B = static_cast<int>(batch.size());
    int l = cfg_.hidden;
    StepOut out;
    out.batch = B;

    nn::Tape::Var h_o = encode_observation_batch(t, batch);

    NoteBatch nb = encode_note_batch(t, batch);
    nn::Tape::Var h_s = pool_note_batch(t, nb, B);

    // aggregate with the recurrent core
    nn::Tape::Var h_x;
    if (cfg_.profile == Profile::Lite) {
      auto gate = t.tanh_(agg_gate_(t, store(), h_s));
      auto x = t.concat_cols({h_o, h_s, t.mul(h_o, gate)});
      h_x = agg_gru_(t, store(), x, state);
      out.state = h_x;
    } else {
      auto u = film(t, film1_w_, film1_, h_o, h_s);
      u = film(t, film2_w_, film2_, u, h_s);
      auto h = t.slice_cols(state, 0, l);
      auto c = t.slice_cols(state, l, 2 * l);
      auto [h2, c2] = agg_lstm_(t, store(), u, h, c);
      h_x = h2;
      out.state = t.concat_cols({h2, c2});
    }

    out.phy_lp = t.row_log_softmax(phy_head_(t, store(), h_x));
    out.value = value_head_(t, store(), h_x);
    if (variant_has_query_heads(cfg_.variant)) {
      out.switch_lp = t.row_log_softmax(switch_head_(t, store(), h_x));
      out.func_lp = t.row_log_softmax(func_head_(t, store(), h_x));
      if (variant_uses_pointer(cfg_.variant)) {
        out.adj = pointer_slots(t, nb, h_x, 1, adj_wq_, adj_wk_);
        out.noun = pointer_slots(t, nb, h_x, 2, noun_wq_, noun_wk_);
      } else {
        out.adj_lp_full = t.row_log_softmax(adj_head_(t, store(), h_x));
        out.noun_lp_full = t.row_log_softmax(noun_head_(t, store(), h_x));
      }
    }
    return out;
  }

  // ---- sampling ----------------------------------------------------------

  struct ActResult {
    Action action;
    double logp = 0.0;
    double value = 0.0;
  };

  ActResult sample_action(nn::Tape& t, const StepOut& out, int i,
                          Rng& rng) const {
    ActResult res;
    res.value = t.val(out.value)(i, 0);
    bool ask = false;
    double lp = 0.0;
    if (variant_has_query_heads(cfg_.variant)) {
      int z = sample_row(t.val(out.switch_lp), i, rng);
      lp += t.val(out.switch_lp)(i, z);
      ask = z == 1;
    }
    if (!ask) {
      int a = sample_row(t.val(out.phy_lp), i, rng);
      lp += t.val(out.phy_lp)(i, a);
      res.action = Action::phys(a);
    } else {
      int f = sample_row(t.val(out.func_lp), i, rng);
      lp += t.val(out.func_lp)(i, f);
      auto [adj, lp_a] = sample_slot(t, out, i, 1, rng);
      auto [noun, lp_n] = sample_slot(t, out, i, 2, rng);
      lp += lp_a + lp_n;
      res.action = Action::ask(Query{vocab_->func_words[f],
                                     vocab_->adjectives[adj],
                                     vocab_->nouns[noun]});
    }
    res.logp = lp;
    return res;
  }

  // ---- training-side evaluation ------------------------------------------

  struct EvalVars {
    nn::Tape::Var logp = -1;     // B x 1 composite log-probability
    nn::Tape::Var entropy = -1;  // B x 1 composite entropy
    nn::Tape::Var value = -1;    // B x 1
  };

  EvalVars evaluate_actions(nn::Tape& t, const StepOut& out,
                            const std::vector<Action>& actions) const {
    int B = out.batch;
    EvalVars ev;
    ev.value = out.value;

    std::vector<std::pair<int, int>> phy_pos(B), sw_pos(B), func_pos(B);
    nn::Mat phy_mask(B, 1), ask_mask(B, 1);
    for (int i = 0; i < B; ++i) {
      bool ask = actions[i].is_ask();
      phy_mask(i, 0) = ask ? 0.0 : 1.0;
      ask_mask(i, 0) = ask ? 1.0 : 0.0;
      phy_pos[i] = {i, ask ? 0 : actions[i].physical};
      sw_pos[i] = {i, ask ? 1 : 0};
      func_pos[i] = {i, ask ? vocab_->func_index(actions[i].query.func) : 0};
    }
    auto phy_m = t.leaf(phy_mask);
    auto ask_m = t.leaf(ask_mask);

    auto phy_col = t.mul(t.gather_elems(out.phy_lp, phy_pos), phy_m);
    nn::Tape::Var lp = phy_col;
    nn::Tape::Var ent;

    if (variant_has_query_heads(cfg_.variant)) {
      auto sw_col = t.gather_elems(out.switch_lp, sw_pos);
      auto func_col = t.mul(t.gather_elems(out.func_lp, func_pos), ask_m);
      auto adj_col = t.mul(slot_logp_col(t, out, actions, 1), ask_m);
      auto noun_col = t.mul(slot_logp_col(t, out, actions, 2), ask_m);
      lp = t.add(t.add(sw_col, phy_col),
                 t.add(func_col, t.add(adj_col, noun_col)));

      // composite entropy: H(switch) + p0 H(phy) + p1 (H(func)+H(adj)+H(noun))
      auto p0 = t.exp_(t.gather_elems(out.switch_lp, first_col(B)));
      auto p1 = t.exp_(t.gather_elems(out.switch_lp, second_col(B)));
      auto h_sw = ent_rows(t, out.switch_lp);
      auto h_phy = ent_rows(t, out.phy_lp);
      auto h_func = ent_rows(t, out.func_lp);
      auto h_adj = slot_entropy_col(t, out, 1);
      auto h_noun = slot_entropy_col(t, out, 2);
      ent = t.add(h_sw, t.add(t.mul(p0, h_phy),
                              t.mul(p1, t.add(h_func,
                                              t.add(h_adj, h_noun)))));
    } else {
      ent = ent_rows(t, out.phy_lp);
    }
    ev.logp = lp;
    ev.entropy = ent;
    return ev;
  }

  // ---- spec-level single-sample helpers (contract tests) ------------------

  // per-note token encodings h_i (|v_i| x l each)
  std::vector<nn::Mat> encode_notes(
      const std::vector<std::vector<int>>& notes) const {
    nn::Tape t;
    SampleInput s;
    s.notes = notes;
    View dummy{};
    s.view = &dummy;
    NoteBatch nb = encode_note_batch(t, {s});
    std::vector<nn::Mat> out;
    int r = 0;
    for (const auto& note : notes) {
      nn::Mat m(static_cast<int>(note.size()), cfg_.hidden);
      for (size_t p = 0; p < note.size(); ++p, ++r)
        for (int c = 0; c < cfg_.hidden; ++c)
          m(static_cast<int>(p), c) = t.val(nb.token_rows)(r, c);
      out.push_back(std::move(m));
    }
    return out;
  }

  // h_s for a single note list
  nn::Mat pool_notes(const std::vector<std::vector<int>>& notes) const {
    nn::Tape t;
    SampleInput s;
    s.notes = notes;
    View dummy{};
    s.view = &dummy;
    NoteBatch nb = encode_note_batch(t, {s});
    auto h_s = pool_note_batch(t, nb, 1);
    return t.val(h_s);
  }

  nn::Mat encode_observation(const View& v) const {
    nn::Tape t;
    SampleInput s;
    s.view = &v;
    s.notes = {{0}};
    auto h_o = encode_observation_batch(t, {s});
    return t.val(h_o);
  }

  // full slot distribution from a pointer slot, for tests and sampling
  std::vector<double> slot_distribution(const nn::Tape& t,
                                        const PointerSlot& ps,
                                        int slot) const {
    size_t n = slot == 1 ? vocab_->adjectives.size() : vocab_->nouns.size();
    std::vector<double> probs(n, 0.0);
    if (ps.fallback) {
      std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(n));
      return probs;
    }
    for (size_t k = 0; k < ps.words.size(); ++k)
      probs[ps.words[k]] = std::exp(t.val(ps.word_logp)(static_cast<int>(k), 0));
    return probs;
  }

 private:
  static constexpr int kOneHot = kNumObjTypes + kNumColors + kNumObjStates;

  nn::ParamStore& store() const { return store_; }

  static std::vector<std::pair<int, int>> first_col(int B) {
    std::vector<std::pair<int, int>> v(B);
    for (int i = 0; i < B; ++i) v[i] = {i, 0};
    return v;
  }
  static std::vector<std::pair<int, int>> second_col(int B) {
    std::vector<std::pair<int, int>> v(B);
    for (int i = 0; i < B; ++i) v[i] = {i, 1};
    return v;
  }

  static nn::Tape::Var ent_rows(nn::Tape& t, nn::Tape::Var lp) {
    return t.scale(t.row_sum(t.mul(t.exp_(lp), lp)), -1.0);
  }

  nn::Tape::Var film(nn::Tape& t, const nn::Linear& w, const nn::Linear& gb,
                     nn::Tape::Var h_o, nn::Tape::Var h_s) const {
    int l = cfg_.hidden;
    auto cond = gb(t, store(), h_s);
    auto gamma = t.slice_cols(cond, 0, l);
    auto beta = t.slice_cols(cond, l, 2 * l);
    return t.add(t.mul(gamma, t.tanh_(w(t, store(), h_o))), beta);
  }

  static int sample_row(const nn::Mat& lp, int row, Rng& rng) {
    double u = rng.uniform_real();
    double acc = 0.0;
    for (int c = 0; c < lp.cols; ++c) {
      acc += std::exp(lp(row, c));
      if (u < acc) return c;
    }
    return lp.cols - 1;
  }

  std::pair<int, double> sample_slot(nn::Tape& t, const StepOut& out, int i,
                                     int slot, Rng& rng) const {
    size_t vocab_n =
        slot == 1 ? vocab_->adjectives.size() : vocab_->nouns.size();
    if (variant_uses_pointer(cfg_.variant)) {
      const PointerSlot& ps =
          slot == 1 ? out.adj[static_cast<size_t>(i)]
                    : out.noun[static_cast<size_t>(i)];
      if (ps.fallback) {
        int w = static_cast<int>(rng.uniform(vocab_n));
        return {w, -std::log(static_cast<double>(vocab_n))};
      }
      const nn::Mat& wl = t.val(ps.word_logp);
      double u = rng.uniform_real();
      double acc = 0.0;
      for (int k = 0; k < wl.rows; ++k) {
        acc += std::exp(wl(k, 0));
        if (u < acc) return {ps.words[k], wl(k, 0)};
      }
      return {ps.words.back(), wl(wl.rows - 1, 0)};
    }
    auto lp_full = slot == 1 ? out.adj_lp_full : out.noun_lp_full;
    int w = sample_row(t.val(lp_full), i, rng);
    return {w, t.val(lp_full)(i, w)};
  }

  // ---- observation encoders ----------------------------------------------

  nn::Tape::Var encode_observation_batch(
      nn::Tape& t, const std::vector<SampleInput>& batch) const {
    int B = static_cast<int>(batch.size());
    nn::Mat dir_onehot(B, 4);
    for (int i = 0; i < B; ++i)
      dir_onehot(i, batch[i].view->at(0, 0, 3) & 3) = 1.0;
    auto dir_var = t.leaf(std::move(dir_onehot));

    if (cfg_.profile == Profile::Lite) {
      std::vector<int> type_idx, color_idx, state_idx;
      type_idx.reserve(static_cast<size_t>(B) * 49);
      color_idx.reserve(static_cast<size_t>(B) * 49);
      state_idx.reserve(static_cast<size_t>(B) * 49);
      for (int i = 0; i < B; ++i)
        for (int vy = 0; vy < kViewSize; ++vy)
          for (int vx = 0; vx < kViewSize; ++vx) {
            type_idx.push_back(batch[i].view->at(vx, vy, 0));
            color_idx.push_back(batch[i].view->at(vx, vy, 1));
            state_idx.push_back(batch[i].view->at(vx, vy, 2));
          }
      auto cells = t.add(
          t.gather_rows(t.param(store_.at(type_emb_)), std::move(type_idx)),
          t.add(t.gather_rows(t.param(store_.at(color_emb_)),
                              std::move(color_idx)),
                t.gather_rows(t.param(store_.at(state_emb_)),
                              std::move(state_idx))));
      auto flat = nn::flatten_rows(t, cells, B, 49);
      auto x = t.concat_cols({flat, dir_var});
      return t.relu_(obs2_(t, store(), t.relu_(obs1_(t, store(), x))));
    }

    // paper profile: one-hot channels through the conv stack
    nn::Mat onehot(B * 49 + 1, kOneHot);
    for (int i = 0; i < B; ++i)
      for (int vy = 0; vy < kViewSize; ++vy)
        for (int vx = 0; vx < kViewSize; ++vx) {
          int r = i * 49 + vy * kViewSize + vx;
          onehot(r, batch[i].view->at(vx, vy, 0)) = 1.0;
          onehot(r, kNumObjTypes + batch[i].view->at(vx, vy, 1)) = 1.0;
          onehot(r, kNumObjTypes + kNumColors +
                        batch[i].view->at(vx, vy, 2)) = 1.0;
        }
    auto x = t.leaf(std::move(onehot));
    auto c1 = t.relu_(conv1_->operator()(t, store(), x, B, 7));  // 6x6
    auto c2 = t.relu_(conv2_->operator()(t, store(), pad_rows(t, c1), B, 6));
    auto c3 = t.relu_(conv3_->operator()(t, store(), pad_rows(t, c2), B, 6));
    auto pooled = nn::maxpool2x2(t, c3, B, 6);  // B*9 x l
    auto flat = nn::flatten_rows(t, pooled, B, 9);
    return obs1_(t, store(), t.concat_cols({flat, dir_var}));
  }

  // conv input expects a trailing zero row for padding indices
  static nn::Tape::Var pad_rows(nn::Tape& t, nn::Tape::Var x) {
    auto zero = t.leaf(nn::Mat(1, t.val(x).cols));
    return t.concat_rows({x, zero});
  }

  // ---- note encoding -------------------------------------------------------

  struct NoteBatch {
    nn::Tape::Var token_rows = -1;  // sum(tokens) x l per-token encodings
    nn::Tape::Var summaries = -1;   // sum(notes) x l
    std::vector<int> note_of_token;   // token row -> global note index
    std::vector<int> sample_of_note;  // note -> sample index
    std::vector<std::vector<int>> sample_token_rows;  // per sample, rows
    std::vector<int> token_word;                      // vocab id per token row
  };

  NoteBatch encode_note_batch(nn::Tape& t,
                              const std::vector<SampleInput>& batch) const {
    NoteBatch nb;
    std::vector<int> token_ids;
    int note_index = 0;
    nb.sample_token_rows.resize(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].notes.empty())
        throw std::invalid_argument("policy: empty note list");
      for (const auto& note : batch[i].notes) {
        for (int tok : note) {
          nb.sample_token_rows[i].push_back(
              static_cast<int>(token_ids.size()));
          token_ids.push_back(tok);
          nb.token_word.push_back(tok);
          nb.note_of_token.push_back(note_index);
        }
        nb.sample_of_note.push_back(static_cast<int>(i));
        ++note_index;
      }
    }
    auto emb = t.gather_rows(t.param(store_.at(emb_)), token_ids);

    if (cfg_.profile == Profile::Lite) {
      nb.token_rows = emb;
      nb.summaries = t.segment_mean(emb, nb.note_of_token, note_index);
    } else {
      // padded batched GRU over note positions; summaries are final states
      int n_notes = note_index;
      std::vector<int> lengths(n_notes, 0);
      for (int n : nb.note_of_token) lengths[n]++;
      int max_len = 0;
      for (int len : lengths) max_len = std::max(max_len, len);
      // row of each (note, position)
      std::vector<std::vector<int>> pos_row(
          max_len, std::vector<int>(n_notes, static_cast<int>(token_ids.size())));
      {
        std::vector<int> seen(n_notes, 0);
        for (size_t r = 0; r < nb.note_of_token.size(); ++r) {
          int n = nb.note_of_token[r];
          pos_row[seen[n]++][n] = static_cast<int>(r);
        }
      }
      auto emb_z = t.concat_rows({emb, t.leaf(nn::Mat(1, cfg_.hidden))});
      auto h = t.leaf(nn::Mat(n_notes, cfg_.hidden));
      std::vector<nn::Tape::Var> outputs(max_len);
      for (int p = 0; p < max_len; ++p) {
        auto x = t.gather_rows(emb_z, pos_row[p]);
        nn::Mat mask(n_notes, 1), inv(n_notes, 1);
        for (int n = 0; n < n_notes; ++n) {
          bool active = p < lengths[n];
          mask(n, 0) = active ? 1.0 : 0.0;
          inv(n, 0) = active ? 0.0 : 1.0;
        }
        auto h2 = note_gru_(t, store(), x, h);
        h = t.add(t.row_scale(h2, t.leaf(std::move(mask))),
                  t.row_scale(h, t.leaf(std::move(inv))));
        outputs[p] = h;
      }
      nb.summaries = h;
      // per-token encodings: gather each token's position output, add emb
      auto all_out = t.concat_rows(outputs);  // (max_len*n_notes) x l
      std::vector<int> token_out_row(nb.note_of_token.size());
      {
        std::vector<int> seen(n_notes, 0);
        for (size_t r = 0; r < nb.note_of_token.size(); ++r) {
          int n = nb.note_of_token[r];
          token_out_row[r] = seen[n] * n_notes + n;
          seen[n]++;
        }
      }
      nb.token_rows = t.add(t.gather_rows(all_out, token_out_row), emb);
    }
    return nb;
  }

  nn::Tape::Var pool_note_batch(nn::Tape& t, const NoteBatch& nb,
                                int B) const {
    auto phi = t.tanh_(set_phi_(t, store(), nb.summaries));
    auto summed = t.segment_sum(phi, nb.sample_of_note, B);
    return t.tanh_(set_rho_(t, store(), summed));
  }

  // ---- pointer heads -------------------------------------------------------

  std::vector<PointerSlot> pointer_slots(nn::Tape& t, const NoteBatch& nb,
                                         nn::Tape::Var h_x, int slot,
                                         int wq, int wk) const {
    int B = static_cast<int>(nb.sample_token_rows.size());
    std::vector<PointerSlot> out(B);

    // sample-major candidate rows
    std::vector<int> cand_rows;
    std::vector<int> cand_sample;
    std::vector<std::vector<int>> per_sample_words(B);
    for (int i = 0; i < B; ++i) {
      for (int r : nb.sample_token_rows[i]) {
        const std::string& w = vocab_->ordered_words()[nb.token_word[r]];
        int idx = slot == 1 ? vocab_->adj_index(w) : vocab_->noun_index(w);
        if (idx < 0) continue;
        cand_rows.push_back(r);
        cand_sample.push_back(i);
        per_sample_words[i].push_back(idx);
      }
    }
    if (cand_rows.empty()) return out;  // all samples fall back

    auto h_w = t.gather_rows(nb.token_rows, cand_rows);
    auto keys = t.matmul(h_w, t.param(store_.at(wk)));
    auto q = t.matmul(h_x, t.param(store_.at(wq)));
    auto scores = t.rows_dot(q, keys, cand_sample);  // sum(m) x 1

    int off = 0;
    for (int i = 0; i < B; ++i) {
      int m = static_cast<int>(per_sample_words[i].size());
      if (m == 0) continue;
      PointerSlot& ps = out[i];
      ps.fallback = false;
      ps.cand_words = per_sample_words[i];
      auto s = t.slice_rows(scores, off, off + m);
      std::vector<int> all(m);
      for (int k = 0; k < m; ++k) all[k] = k;
      auto z = t.subset_logsumexp(s, {all});
      ps.cand_logp = t.sub_scalar(s, z);
      // aggregate duplicate words
      std::vector<std::vector<int>> groups;
      for (int k = 0; k < m; ++k) {
        int w = ps.cand_words[k];
        bool seen = false;
        for (int ww : ps.words) seen = seen || ww == w;
        if (seen) continue;
        ps.words.push_back(w);
        std::vector<int> g;
        for (int k2 = 0; k2 < m; ++k2)
          if (ps.cand_words[k2] == w) g.push_back(k2);
        groups.push_back(std::move(g));
      }
      ps.word_logp = t.subset_logsumexp(ps.cand_logp, std::move(groups));
      off += m;
    }
    return out;
  }

  // chosen-word log-probability column over the batch
  nn::Tape::Var slot_logp_col(nn::Tape& t, const StepOut& out,
                              const std::vector<Action>& actions,
                              int slot) const {
    int B = out.batch;
    std::vector<nn::Tape::Var> rows;
    rows.reserve(B);
    if (!variant_uses_pointer(cfg_.variant)) {
      std::vector<std::pair<int, int>> pos(B);
      for (int i = 0; i < B; ++i) {
        int w = 0;
        if (actions[i].is_ask())
          w = slot == 1 ? vocab_->adj_index(actions[i].query.adj)
                        : vocab_->noun_index(actions[i].query.noun);
        pos[i] = {i, w};
      }
      return t.gather_elems(slot == 1 ? out.adj_lp_full : out.noun_lp_full,
                            pos);
    }
    for (int i = 0; i < B; ++i) {
      const PointerSlot& ps = slot == 1 ? out.adj[i] : out.noun[i];
      if (!actions[i].is_ask()) {
        rows.push_back(t.leaf(nn::Mat(1, 1)));
        continue;
      }
      int w = slot == 1 ? vocab_->adj_index(actions[i].query.adj)
                        : vocab_->noun_index(actions[i].query.noun);
      if (ps.fallback) {
        double n = slot == 1 ? static_cast<double>(vocab_->adjectives.size())
                             : static_cast<double>(vocab_->nouns.size());
        rows.push_back(t.leaf(nn::Mat(1, 1, {-std::log(n)})));
        continue;
      }
      int k = -1;
      for (size_t j = 0; j < ps.words.size(); ++j)
        if (ps.words[j] == w) k = static_cast<int>(j);
      if (k < 0)
        throw std::logic_error("action word outside pointer support");
      rows.push_back(t.slice_rows(ps.word_logp, k, k + 1));
    }
    return t.concat_rows(rows);
  }

  nn::Tape::Var slot_entropy_col(nn::Tape& t, const StepOut& out,
                                 int slot) const {
    int B = out.batch;
    if (!variant_uses_pointer(cfg_.variant))
      return ent_rows(t, slot == 1 ? out.adj_lp_full : out.noun_lp_full);
    std::vector<nn::Tape::Var> rows;
    rows.reserve(B);
    for (int i = 0; i < B; ++i) {
      const PointerSlot& ps = slot == 1 ? out.adj[i] : out.noun[i];
      if (ps.fallback) {
        double n = slot == 1 ? static_cast<double>(vocab_->adjectives.size())
                             : static_cast<double>(vocab_->nouns.size());
        rows.push_back(t.leaf(nn::Mat(1, 1, {std::log(n)})));
        continue;
      }
      rows.push_back(
          t.scale(t.sum_all(t.mul(t.exp_(ps.word_logp), ps.word_logp)),
                  -1.0));
    }
    return t.concat_rows(rows);
  }

  PolicyConfig cfg_;
  const Vocabulary* vocab_;
  mutable nn::ParamStore store_;

  int emb_ = -1;
  int type_emb_ = -1, color_emb_ = -1, state_emb_ = -1;
  nn::Linear obs1_, obs2_;
  std::optional<nn::Conv2d> conv1_, conv2_, conv3_;
  nn::GruCell note_gru_;
  nn::Linear agg_gate_;
  nn::GruCell agg_gru_;
  nn::Linear film1_, film2_, film1_w_, film2_w_;
  nn::LstmCell agg_lstm_;
  nn::Linear set_phi_, set_rho_;
  nn::Mlp2 switch_head_, phy_head_, func_head_, value_head_;
  nn::Mlp2 adj_head_, noun_head_;
  int adj_wq_ = -1, adj_wk_ = -1, noun_wq_ = -1, noun_wk_ = -1;
};

}  // namespace qgrid
