#include "labelprop/hopfield.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "labelprop/json_io.hpp"
#include "labelprop/kernels.hpp"
#include "labelprop/rng.hpp"

namespace labelprop {

namespace {

struct BankForward {
    Matrix q;  // N x p
    Matrix k;  // C x p
    Matrix s;  // N x C, row-stochastic
};

struct ForwardCache {
    std::vector<BankForward> banks;
    Matrix scores;  // N x C, mean over banks
};

ForwardCache run_forward(const HopfieldHead& head, const Matrix& queries) {
    if (queries.cols() != head.d) {
        throw std::invalid_argument("forward: queries have width " +
                                    std::to_string(queries.cols()) +
                                    ", head expects " + std::to_string(head.d));
    }
    const std::size_t n = queries.rows();
    const std::size_t c = head.num_classes();
    ForwardCache cache;
    for (const Bank& bank : head.banks) {
        BankForward bf;
        bf.q = matmul(queries, bank.w_q);
        bf.k = matmul(bank.y, bank.w_k);
        bf.s = matmul_nt(bf.q, bf.k);
        kern::scale(bf.s.data(), head.beta, bf.s.size());
        for (std::size_t i = 0; i < n; ++i) softmax_row(bf.s.row(i), c);
        cache.banks.push_back(std::move(bf));
    }
    // Mean across banks, accumulated in extended precision so that m
    // identical banks reproduce the single-bank scores bit-exactly.
    cache.scores = Matrix(n, c);
    const auto mm = static_cast<long double>(head.m);
    for (std::size_t i = 0; i < n * c; ++i) {
        long double acc = 0.0L;
        for (const BankForward& bf : cache.banks) acc += bf.s.data()[i];
        cache.scores.data()[i] = static_cast<double>(acc / mm);
    }
    return cache;
}

// Normalized rows of a bank's Y along with the norms.
void normalized_rows(const Matrix& y, Matrix& yhat, std::vector<double>& norms) {
    yhat = Matrix(y.rows(), y.cols());
    norms.assign(y.rows(), 0.0);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        const double nrm = l2_norm(y.row_span(r));
        if (!(nrm > 0.0)) {
            throw std::runtime_error("representative row " + std::to_string(r) +
                                     " has zero norm");
        }
        norms[r] = nrm;
        for (std::size_t j = 0; j < y.cols(); ++j) yhat(r, j) = y(r, j) / nrm;
    }
}

// Mean over unordered class pairs of ||yhat_c - yhat_c'||^2, per bank.
double intra_term(const Bank& bank) {
    const std::size_t c = bank.y.rows();
    if (c < 2) return 0.0;
    Matrix yhat;
    std::vector<double> norms;
    normalized_rows(bank.y, yhat, norms);
    double acc = 0.0;
    for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = a + 1; b < c; ++b) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < yhat.cols(); ++j) {
                const double diff = yhat(a, j) - yhat(b, j);
                d2 += diff * diff;
            }
            acc += d2;
        }
    }
    const double pairs = static_cast<double>(c) * (c - 1) / 2.0;
    return acc / pairs;
}

// Mean over classes of mean over unordered bank pairs of
// cos^2(Y_b[c], Y_b'[c]).
double inter_term(const HopfieldHead& head) {
    if (head.m < 2) return 0.0;
    const std::size_t c = head.num_classes();
    const double bank_pairs = static_cast<double>(head.m) * (head.m - 1) / 2.0;
    double acc = 0.0;
    for (std::size_t cls = 0; cls < c; ++cls) {
        double cls_acc = 0.0;
        for (int a = 0; a < head.m; ++a) {
            for (int b = a + 1; b < head.m; ++b) {
                const double cs = cosine(head.banks[a].y.row_span(cls),
                                         head.banks[b].y.row_span(cls));
                cls_acc += cs * cs;
            }
        }
        acc += cls_acc / bank_pairs;
    }
    return acc / static_cast<double>(c);
}

double mse_term(const Matrix& scores, const std::vector<int>& labels) {
    const std::size_t n = scores.rows();
    const std::size_t c = scores.cols();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
            const double diff = scores(i, j) - target;
            acc += diff * diff;
        }
    }
    return acc / (static_cast<double>(n) * static_cast<double>(c));
}

void check_batch(const HopfieldHead& head, const Batch& batch) {
    if (batch.queries.rows() == 0) {
        throw std::invalid_argument("empty batch");
    }
    if (batch.labels.size() != batch.queries.rows()) {
        throw std::invalid_argument("batch labels/queries size mismatch");
    }
    const std::size_t c = head.num_classes();
    for (int label : batch.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= c) {
            throw std::invalid_argument("batch label " + std::to_string(label) +
                                        " out of range");
        }
    }
}

struct AdamState {
    std::vector<Bank> m;
    std::vector<Bank> v;
    long step = 0;
};

Bank zero_like(const Bank& b) {
    return Bank{Matrix(b.w_q.rows(), b.w_q.cols()),
                Matrix(b.w_k.rows(), b.w_k.cols()),
                Matrix(b.y.rows(), b.y.cols())};
}

void apply_update(HopfieldHead& head, const Gradients& grads,
                  const Hyperparams& hp, AdamState& state) {
    if (hp.optimizer == Optimizer::PlainSGD) {
        for (int b = 0; b < head.m; ++b) {
            add_scaled(head.banks[b].w_q, grads.banks[b].w_q, -hp.learning_rate);
            add_scaled(head.banks[b].w_k, grads.banks[b].w_k, -hp.learning_rate);
            add_scaled(head.banks[b].y, grads.banks[b].y, -hp.learning_rate);
        }
        return;
    }
    ++state.step;
    const double bias1 = 1.0 - std::pow(hp.adam_beta1, static_cast<double>(state.step));
    const double bias2 = 1.0 - std::pow(hp.adam_beta2, static_cast<double>(state.step));
    auto step = [&](Matrix& param, Matrix& m, Matrix& v, const Matrix& g) {
        kern::adam_step(param.data(), m.data(), v.data(), g.data(), g.size(),
                        hp.learning_rate, hp.adam_beta1, hp.adam_beta2,
                        hp.adam_eps, bias1, bias2);
    };
    for (int b = 0; b < head.m; ++b) {
        step(head.banks[b].w_q, state.m[b].w_q, state.v[b].w_q, grads.banks[b].w_q);
        step(head.banks[b].w_k, state.m[b].w_k, state.v[b].w_k, grads.banks[b].w_k);
        step(head.banks[b].y, state.m[b].y, state.v[b].y, grads.banks[b].y);
    }
}

}  // namespace

void HopfieldHead::validate() const {
    if (m < 1) throw std::invalid_argument("head: m must be >= 1");
    if (p < 1) throw std::invalid_argument("head: p must be >= 1");
    if (d < 1) throw std::invalid_argument("head: d must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("head: beta must be positive");
    if (banks.size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("head: bank count != m");
    }
    const std::size_t c = num_classes();
    if (c == 0) throw std::invalid_argument("head: no classes");
    for (const Bank& bank : banks) {
        if (bank.w_q.rows() != d || bank.w_q.cols() != p ||
            bank.w_k.rows() != d || bank.w_k.cols() != p ||
            bank.y.rows() != c || bank.y.cols() != d) {
            throw std::invalid_argument("head: inconsistent bank shapes");
        }
        if (!bank.w_q.all_finite() || !bank.w_k.all_finite() || !bank.y.all_finite()) {
            throw std::invalid_argument("head: non-finite parameters");
        }
    }
}

void Hyperparams::validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (lambda_inter < 0.0 || lambda_intra < 0.0) {
        throw std::invalid_argument("regularizer weights must be nonnegative");
    }
}

HopfieldHead init_head(const EmbeddingStore& store, const std::string& space,
                       std::size_t p, int m, std::optional<double> beta,
                       std::uint64_t seed, double noise_scale) {
    if (m < 1) throw std::invalid_argument("init_head: m must be >= 1");
    if (p < 1) throw std::invalid_argument("init_head: p must be >= 1");
    const SpaceData& data = store.space(space);
    const std::size_t c = store.registry.size();
    const std::size_t d = data.dim;

    // Class means over the representative split.
    Matrix means(c, d);
    std::vector<std::size_t> counts(c, 0);
    for (const auto* rec : store.labeled_records(space, "representative")) {
        const auto cls = static_cast<std::size_t>(*rec->class_id);
        kern::axpy(1.0, rec->vector.data(), means.row(cls), d);
        ++counts[cls];
    }
    for (std::size_t cls = 0; cls < c; ++cls) {
        if (counts[cls] == 0) {
            throw std::runtime_error("class '" + store.registry.at(static_cast<int>(cls)).name +
                                     "' has no representative embeddings in space '" +
                                     space + "'");
        }
        kern::scale(means.row(cls), 1.0 / static_cast<double>(counts[cls]), d);
    }

    HopfieldHead head;
    head.space = space;
    head.d = d;
    head.p = p;
    head.m = m;
    head.beta = beta.value_or(1.0 / std::sqrt(static_cast<double>(p)));

    SplitRng root(seed);
    const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
    for (int b = 0; b < m; ++b) {
        Bank bank{Matrix(d, p), Matrix(d, p), Matrix(c, d)};
        SplitRng wq = root.split("wq", static_cast<std::uint64_t>(b));
        SplitRng wk = root.split("wk", static_cast<std::uint64_t>(b));
        for (std::size_t i = 0; i < d * p; ++i) {
            bank.w_q.data()[i] = w_std * wq.next_gaussian();
        }
        for (std::size_t i = 0; i < d * p; ++i) {
            bank.w_k.data()[i] = w_std * wk.next_gaussian();
        }
        for (std::size_t cls = 0; cls < c; ++cls) {
            SplitRng yr = root.split("ynoise", static_cast<std::uint64_t>(b), cls);
            const double sigma = noise_scale * l2_norm(means.row_span(cls));
            for (std::size_t j = 0; j < d; ++j) {
                bank.y(cls, j) = means(cls, j) + sigma * yr.next_gaussian();
            }
        }
        head.banks.push_back(std::move(bank));
    }
    head.validate();
    return head;
}

Matrix forward_scores(const HopfieldHead& head, const Matrix& queries) {
    if (!queries.all_finite()) {
        throw std::invalid_argument("forward: non-finite query");
    }
    return run_forward(head, queries).scores;
}

LossTerms loss(const HopfieldHead& head, const Batch& batch,
               const Hyperparams& hp) {
    check_batch(head, batch);
    const ForwardCache cache = run_forward(head, batch.queries);
    LossTerms terms;
    terms.mse = mse_term(cache.scores, batch.labels);
    double intra_acc = 0.0;
    for (const Bank& bank : head.banks) intra_acc += intra_term(bank);
    terms.intra = intra_acc / static_cast<double>(head.m);
    terms.inter = inter_term(head);
    terms.total = terms.mse + hp.lambda_intra * terms.intra +
                  hp.lambda_inter * terms.inter;
    return terms;
}

Gradients gradients(const HopfieldHead& head, const Batch& batch,
                    const Hyperparams& hp) {
    check_batch(head, batch);
    const std::size_t n = batch.queries.rows();
    const std::size_t c = head.num_classes();
    const ForwardCache cache = run_forward(head, batch.queries);

    Gradients grads;
    for (const Bank& bank : head.banks) grads.banks.push_back(zero_like(bank));

    // d(mse)/d(scores), shared across banks; each bank sees 1/m of it.
    Matrix dscores(n, c);
    const double inv_nc = 2.0 / (static_cast<double>(n) * static_cast<double>(c));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            const double target = (static_cast<std::size_t>(batch.labels[i]) == j) ? 1.0 : 0.0;
            dscores(i, j) = inv_nc * (cache.scores(i, j) - target);
        }
    }

    for (int b = 0; b < head.m; ++b) {
        const Bank& bank = head.banks[b];
        const BankForward& bf = cache.banks[static_cast<std::size_t>(b)];

        // Softmax backprop per row, then fold in beta and the 1/m bank share:
        // dlogits_i = beta/m * s_i ∘ (g_i − <g_i, s_i>).
        Matrix dlogits(n, c);
        const double bank_scale = head.beta / static_cast<double>(head.m);
        for (std::size_t i = 0; i < n; ++i) {
            const double inner = kern::dot(dscores.row(i), bf.s.row(i), c);
            for (std::size_t j = 0; j < c; ++j) {
                dlogits(i, j) = bank_scale * bf.s(i, j) * (dscores(i, j) - inner);
            }
        }

        const Matrix dq = matmul(dlogits, bf.k);      // N x p
        const Matrix dk = matmul_tn(dlogits, bf.q);   // C x p
        grads.banks[b].w_q = matmul_tn(batch.queries, dq);  // d x p
        grads.banks[b].w_k = matmul_tn(bank.y, dk);         // d x p
        grads.banks[b].y = matmul_nt(dk, bank.w_k);         // C x d

        // Intra-bank clustering term.
        if (c >= 2 && hp.lambda_intra != 0.0) {
            Matrix yhat;
            std::vector<double> norms;
            normalized_rows(bank.y, yhat, norms);
            std::vector<double> sum_rows(head.d, 0.0);
            for (std::size_t cls = 0; cls < c; ++cls) {
                kern::axpy(1.0, yhat.row(cls), sum_rows.data(), head.d);
            }
            const double pairs = static_cast<double>(c) * (c - 1) / 2.0;
            const double coeff =
                hp.lambda_intra / static_cast<double>(head.m) * 2.0 / pairs;
            std::vector<double> ghat(head.d);
            for (std::size_t cls = 0; cls < c; ++cls) {
                for (std::size_t j = 0; j < head.d; ++j) {
                    ghat[j] = coeff * (static_cast<double>(c) * yhat(cls, j) -
                                       sum_rows[j]);
                }
                // Through the normalization: g_y = (g − (g·ŷ)ŷ)/||y||.
                const double proj = kern::dot(ghat.data(), yhat.row(cls), head.d);
                for (std::size_t j = 0; j < head.d; ++j) {
                    grads.banks[b].y(cls, j) +=
                        (ghat[j] - proj * yhat(cls, j)) / norms[cls];
                }
            }
        }
    }

    // Inter-bank decorrelation term couples bank pairs.
    if (head.m >= 2 && hp.lambda_inter != 0.0) {
        const double bank_pairs = static_cast<double>(head.m) * (head.m - 1) / 2.0;
        const double coeff =
            hp.lambda_inter / (static_cast<double>(c) * bank_pairs);
        for (std::size_t cls = 0; cls < c; ++cls) {
            for (int a = 0; a < head.m; ++a) {
                for (int b = a + 1; b < head.m; ++b) {
                    const double* u = head.banks[a].y.row(cls);
                    const double* v = head.banks[b].y.row(cls);
                    const double nu = l2_norm({u, head.d});
                    const double nv = l2_norm({v, head.d});
                    const double cs = kern::dot(u, v, head.d) / (nu * nv);
                    // d(cos^2)/du = 2 cos (v̂ − cos·û)/||u||, symmetrically for v.
                    for (std::size_t j = 0; j < head.d; ++j) {
                        const double uhat = u[j] / nu;
                        const double vhat = v[j] / nv;
                        grads.banks[a].y(cls, j) +=
                            coeff * 2.0 * cs * (vhat - cs * uhat) / nu;
                        grads.banks[b].y(cls, j) +=
                            coeff * 2.0 * cs * (uhat - cs * vhat) / nv;
                    }
                }
            }
        }
    }
    return grads;
}

std::pair<HopfieldHead, TrainReport> train_head(HopfieldHead head,
                                                const EmbeddingStore& store,
                                                const std::string& split,
                                                const Hyperparams& hp) {
    hp.validate();
    head.validate();
    const auto t0 = std::chrono::steady_clock::now();

    const auto records = store.labeled_records(head.space, split);
    if (records.empty()) {
        throw std::runtime_error("split '" + split +
                                 "' has no labeled records in space '" +
                                 head.space + "'");
    }
    const std::size_t n = records.size();
    Matrix all_queries(n, head.d);
    std::vector<int> all_labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(records[i]->vector.begin(), records[i]->vector.end(),
                  all_queries.row(i));
        all_labels[i] = *records[i]->class_id;
    }

    AdamState state;
    for (const Bank& bank : head.banks) {
        state.m.push_back(zero_like(bank));
        state.v.push_back(zero_like(bank));
    }

    SplitRng root(hp.seed);
    TrainReport report;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        SplitRng erng = root.split("shuffle", static_cast<std::uint64_t>(epoch));
        std::iota(order.begin(), order.end(), 0);
        erng.shuffle(order);
        for (std::size_t start = 0; start < n;
             start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t stop =
                std::min(n, start + static_cast<std::size_t>(hp.batch_size));
            Batch batch;
            batch.queries = Matrix(stop - start, head.d);
            batch.labels.resize(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t src = order[i];
                std::copy(all_queries.row(src), all_queries.row(src) + head.d,
                          batch.queries.row(i - start));
                batch.labels[i - start] = all_labels[src];
            }
            const Gradients grads = gradients(head, batch, hp);
            apply_update(head, grads, hp, state);
        }

        Batch full{all_queries, all_labels};
        const LossTerms terms = loss(head, full, hp);
        const Matrix scores = forward_scores(head, all_queries);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(scores.row(i), scores.row(i) + scores.cols());
            if (argmax_lowest(row) == all_labels[i]) ++correct;
        }
        report.epochs.push_back(EpochStats{
            terms.total, terms.mse, terms.intra, terms.inter,
            static_cast<double>(correct) / static_cast<double>(n)});
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(head), std::move(report)};
}

ScoreVector predict(const HopfieldHead& head, std::span<const double> query) {
    if (query.size() != head.d) {
        throw std::invalid_argument("predict: query has length " +
                                    std::to_string(query.size()) +
                                    ", head expects " + std::to_string(head.d));
    }
    Matrix q(1, head.d);
    std::copy(query.begin(), query.end(), q.row(0));
    const Matrix scores = forward_scores(head, q);
    return ScoreVector::from_scores(
        std::vector<double>(scores.row(0), scores.row(0) + scores.cols()));
}

// ---------------------------------------------------------------------------
// Serialization: one JSON document, numbers at 17 significant digits.
// ---------------------------------------------------------------------------

namespace {

void append_matrix(std::string& out, const Matrix& m) {
    out += '[';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        if (i) out += ',';
        append_double_array(out, m.row_span(i));
    }
    out += ']';
}

Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows,
                        std::size_t cols, const char* what) {
    if (!j.is_array() || j.size() != rows) {
        throw std::runtime_error(std::string(what) + ": expected " +
                                 std::to_string(rows) + " rows");
    }
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto row = j[i].get<std::vector<double>>();
        if (row.size() != cols) {
            throw std::runtime_error(std::string(what) + ": row " +
                                     std::to_string(i) + " has wrong width");
        }
        std::copy(row.begin(), row.end(), m.row(i));
    }
    return m;
}

std::string checksum_hex(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

void save_head(const HopfieldHead& head, const std::filesystem::path& path,
               std::optional<std::uint64_t> registry_checksum) {
    head.validate();
    std::string out;
    out += "{\"format\":\"hopfield-head/1\",\"space\":" + json_quote(head.space) +
           ",\"d\":" + std::to_string(head.d) + ",\"p\":" + std::to_string(head.p) +
           ",\"m\":" + std::to_string(head.m) + ",\"beta\":" + fmt_double(head.beta);
    if (registry_checksum) {
        out += ",\"registry_checksum\":\"" + checksum_hex(*registry_checksum) + "\"";
    }
    out += ",\"banks\":[";
    for (std::size_t b = 0; b < head.banks.size(); ++b) {
        if (b) out += ',';
        out += "{\"W_Q\":";
        append_matrix(out, head.banks[b].w_q);
        out += ",\"W_K\":";
        append_matrix(out, head.banks[b].w_k);
        out += ",\"Y\":";
        append_matrix(out, head.banks[b].y);
        out += '}';
    }
    out += "]}\n";
    write_text_file(path, out);
}

HopfieldHead load_head(const std::filesystem::path& path,
                       std::optional<std::uint64_t>* registry_checksum) {
    const nlohmann::json doc = parse_json_file(path);
    if (require_field(doc, "format", "head").get<std::string>() != "hopfield-head/1") {
        throw std::runtime_error(path.string() + ": unexpected format");
    }
    HopfieldHead head;
    head.space = require_field(doc, "space", "head").get<std::string>();
    head.d = require_field(doc, "d", "head").get<std::size_t>();
    head.p = require_field(doc, "p", "head").get<std::size_t>();
    head.m = require_field(doc, "m", "head").get<int>();
    head.beta = require_field(doc, "beta", "head").get<double>();
    if (registry_checksum) {
        *registry_checksum = std::nullopt;
        if (doc.contains("registry_checksum")) {
            *registry_checksum = std::stoull(
                doc["registry_checksum"].get<std::string>(), nullptr, 16);
        }
    }
    const auto& banks = require_field(doc, "banks", "head");
    if (!banks.is_array() || banks.size() != static_cast<std::size_t>(head.m)) {
        throw std::runtime_error(path.string() + ": bank count mismatch");
    }
    std::size_t c = 0;
    if (!banks.empty()) c = require_field(banks[0], "Y", "bank").size();
    for (const auto& bj : banks) {
        Bank bank;
        bank.w_q = matrix_from_json(require_field(bj, "W_Q", "bank"), head.d, head.p, "W_Q");
        bank.w_k = matrix_from_json(require_field(bj, "W_K", "bank"), head.d, head.p, "W_K");
        bank.y = matrix_from_json(require_field(bj, "Y", "bank"), c, head.d, "Y");
        head.banks.push_back(std::move(bank));
    }
    head.validate();
    return head;
}

}  // namespace labelprop
