#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/perception.hpp"

namespace ksyn {

namespace {

double rbf_kernel(const Vec& a, const Vec& b, double gamma) {
    return std::exp(-gamma * (a - b).squaredNorm());
}

// Binary SMO over labels +/-1; dual min 1/2 a^T Q a - e^T a with
// 0 <= a <= C, y^T a = 0, solved by maximal-violating-pair selection.
struct BinaryProblem {
    Mat x;      // rows
    Vec y;      // +/-1
    double c = 10.0;
    double gamma = 2.0;
    double tol = 1e-3;
};

struct BinarySolution {
    Vec alpha;
    double bias = 0.0;
};

BinarySolution solve_smo(const BinaryProblem& prob) {
    const int n = static_cast<int>(prob.x.rows());
    Mat q(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            const double k = rbf_kernel(prob.x.row(i).transpose(), prob.x.row(j).transpose(),
                                        prob.gamma);
            q(i, j) = prob.y[i] * prob.y[j] * k;
            q(j, i) = q(i, j);
        }

    Vec alpha = Vec::Zero(n);
    Vec grad = Vec::Constant(n, -1.0);
    const long long max_steps = 100000LL + 200LL * n * n;
    double m_up = 0.0, m_low = 0.0;
    for (long long step = 0; step < max_steps; ++step) {
        // i maximizes -y_i grad_i over I_up; j minimizes it over I_low.
        int i = -1, j = -1;
        m_up = -std::numeric_limits<double>::infinity();
        m_low = std::numeric_limits<double>::infinity();
        for (int t = 0; t < n; ++t) {
            const bool up = (prob.y[t] > 0 && alpha[t] < prob.c) || (prob.y[t] < 0 && alpha[t] > 0);
            const bool low = (prob.y[t] < 0 && alpha[t] < prob.c) || (prob.y[t] > 0 && alpha[t] > 0);
            const double v = -prob.y[t] * grad[t];
            if (up && v > m_up) {
                m_up = v;
                i = t;
            }
            if (low && v < m_low) {
                m_low = v;
                j = t;
            }
        }
        if (i < 0 || j < 0 || m_up - m_low <= prob.tol) break;

        // Two-variable subproblem along alpha_i += y_i t, alpha_j -= y_j t
        // (keeps y^T alpha constant). Unconstrained optimum, then box clip.
        const double yi = prob.y[i], yj = prob.y[j];
        const double quad = std::max(q(i, i) + q(j, j) - 2.0 * yi * yj * q(i, j), 1e-12);
        const double max_step_i = yi > 0 ? prob.c - alpha[i] : alpha[i];
        const double max_step_j = yj > 0 ? alpha[j] : prob.c - alpha[j];
        const double t = std::min({(m_up - m_low) / quad, max_step_i, max_step_j});
        if (t <= 0.0) break;
        alpha[i] = std::clamp(alpha[i] + yi * t, 0.0, prob.c);
        alpha[j] = std::clamp(alpha[j] - yj * t, 0.0, prob.c);
        for (int t2 = 0; t2 < n; ++t2)
            grad[t2] += q(t2, i) * (yi * t) + q(t2, j) * (-yj * t);
    }

    // Bias from the KKT certificate: average -y grad over free vectors,
    // else the midpoint of the violating-pair bounds.
    double sum = 0.0;
    int free_count = 0;
    for (int t = 0; t < n; ++t) {
        if (alpha[t] > 1e-12 && alpha[t] < prob.c - 1e-12) {
            sum += -prob.y[t] * grad[t];
            ++free_count;
        }
    }
    BinarySolution sol;
    sol.alpha = alpha;
    sol.bias = free_count > 0 ? sum / free_count : 0.5 * (m_up + m_low);
    return sol;
}

double pair_decision(const SvmPair& pair, const Vec& x, double gamma) {
    double sum = pair.bias;
    for (Eigen::Index i = 0; i < pair.support_vectors.rows(); ++i)
        sum += pair.dual_coefficients[i] *
               rbf_kernel(pair.support_vectors.row(i).transpose(), x, gamma);
    return sum;
}

} // namespace

SvmModel svm_train(const std::vector<SvmSample>& dataset, double c, double gamma,
                   std::uint64_t seed) {
    (void)seed; // training is deterministic; the seed is part of the pipeline contract
    if (!(c > 0.0) || !(gamma > 0.0)) throw InvalidInput("C and gamma must be positive");
    std::map<std::string, std::vector<int>> by_class;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        by_class[dataset[i].label].push_back(static_cast<int>(i));
    if (by_class.size() < 2) throw InvalidInput("training needs at least two classes");
    for (const auto& [label, idx] : by_class)
        if (idx.size() < 2)
            throw InvalidInput("class '" + label + "' needs at least two samples");

    SvmModel model;
    model.c = c;
    model.gamma = gamma;
    for (const auto& [label, idx] : by_class) {
        (void)idx;
        model.classes.push_back(label);
    }

    const int nc = static_cast<int>(model.classes.size());
    for (int a = 0; a < nc; ++a) {
        for (int b = a + 1; b < nc; ++b) {
            const auto& ia = by_class[model.classes[static_cast<std::size_t>(a)]];
            const auto& ib = by_class[model.classes[static_cast<std::size_t>(b)]];
            BinaryProblem prob;
            prob.c = c;
            prob.gamma = gamma;
            prob.tol = model.kkt_tolerance;
            prob.x.resize(static_cast<Eigen::Index>(ia.size() + ib.size()), FeatureVector::kDim);
            prob.y.resize(prob.x.rows());
            Eigen::Index row = 0;
            for (int i : ia) {
                prob.x.row(row) = dataset[static_cast<std::size_t>(i)].feature.values.transpose();
                prob.y[row++] = 1.0;
            }
            for (int i : ib) {
                prob.x.row(row) = dataset[static_cast<std::size_t>(i)].feature.values.transpose();
                prob.y[row++] = -1.0;
            }
            const BinarySolution sol = solve_smo(prob);

            SvmPair pair;
            pair.class_a = a;
            pair.class_b = b;
            pair.bias = sol.bias;
            std::vector<Eigen::Index> sv;
            for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
                if (sol.alpha[i] > 1e-12) sv.push_back(i);
            pair.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), FeatureVector::kDim);
            pair.dual_coefficients.resize(static_cast<Eigen::Index>(sv.size()));
            for (std::size_t k = 0; k < sv.size(); ++k) {
                pair.support_vectors.row(static_cast<Eigen::Index>(k)) = prob.x.row(sv[k]);
                pair.dual_coefficients[static_cast<Eigen::Index>(k)] =
                    sol.alpha[sv[k]] * prob.y[sv[k]];
            }
            model.pairs.push_back(std::move(pair));
        }
    }
    return model;
}

namespace {

std::pair<int, int> vote(const SvmModel& model, const FeatureVector& f) {
    if (f.values.size() != FeatureVector::kDim)
        throw InvalidInput("feature dimension mismatch");
    std::vector<int> votes(model.classes.size(), 0);
    const Vec x = f.values;
    for (const auto& pair : model.pairs) {
        const double d = pair_decision(pair, x, model.gamma);
        if (std::abs(d) < 1e-12) continue; // exactly ambiguous pair abstains
        ++votes[static_cast<std::size_t>(d > 0.0 ? pair.class_a : pair.class_b)];
    }
    int winner = 0;
    for (std::size_t k = 1; k < votes.size(); ++k)
        if (votes[k] > votes[static_cast<std::size_t>(winner)]) winner = static_cast<int>(k);
    return {winner, votes[static_cast<std::size_t>(winner)]};
}

} // namespace

Classification svm_classify(const SvmModel& model, const FeatureVector& f, double reject_threshold) {
    const auto [winner, winning_votes] = vote(model, f);
    Classification out;
    out.votes = winning_votes;
    out.confidence = static_cast<double>(winning_votes) / static_cast<double>(model.pairs.size());
    if (out.confidence >= reject_threshold)
        out.label = model.classes[static_cast<std::size_t>(winner)];
    return out;
}

std::string svm_predict(const SvmModel& model, const FeatureVector& f) {
    const auto [winner, winning_votes] = vote(model, f);
    (void)winning_votes;
    return model.classes[static_cast<std::size_t>(winner)];
}

ConfusionResult evaluate_confusion(const SvmModel& model, const std::vector<SvmSample>& testset) {
    if (testset.empty()) throw InvalidInput("confusion evaluation needs a non-empty test set");
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < model.classes.size(); ++i)
        class_index[model.classes[i]] = static_cast<int>(i);
    const int nc = static_cast<int>(model.classes.size());
    ConfusionResult result;
    result.classes = model.classes;
    result.counts = Eigen::MatrixXi::Zero(nc, nc);
    for (const auto& sample : testset) {
        const auto it = class_index.find(sample.label);
        if (it == class_index.end())
            throw InvalidInput("test label '" + sample.label + "' is unknown to the model");
        const std::string predicted = svm_predict(model, sample.feature);
        result.counts(it->second, class_index[predicted]) += 1;
    }
    result.normalized = Mat::Zero(nc, nc);
    for (int r = 0; r < nc; ++r) {
        const double total = result.counts.row(r).sum();
        if (total > 0) result.normalized.row(r) = result.counts.row(r).cast<double>() / total;
    }
    result.accuracy =
        static_cast<double>(result.counts.trace()) / static_cast<double>(result.counts.sum());
    return result;
}

void save_confusion_csv(const std::filesystem::path& path, const ConfusionResult& result) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write confusion CSV: " + path.string());
    out << "truth\\prediction";
    for (const auto& c : result.classes) out << "," << c;
    out << "\n";
    for (std::size_t r = 0; r < result.classes.size(); ++r) {
        out << result.classes[r];
        for (std::size_t c = 0; c < result.classes.size(); ++c)
            out << "," << format_double(result.normalized(static_cast<Eigen::Index>(r),
                                                          static_cast<Eigen::Index>(c)));
        out << "\n";
    }
}

void SvmModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["classes"] = classes;
    j["c"] = c;
    j["gamma"] = gamma;
    j["kkt_tolerance"] = kkt_tolerance;
    nlohmann::json pairs_json = nlohmann::json::array();
    for (const auto& p : pairs) {
        pairs_json.push_back({{"class_a", p.class_a},
                              {"class_b", p.class_b},
                              {"bias", p.bias},
                              {"support_vectors", to_json(p.support_vectors)},
                              {"dual_coefficients", to_json(p.dual_coefficients)}});
    }
    j["pairs"] = std::move(pairs_json);
    save_model_file(path, "svm.v1", std::move(j));
}

SvmModel SvmModel::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "svm.v1");
    SvmModel model;
    try {
        model.classes = j.at("classes").get<std::vector<std::string>>();
        model.c = j.at("c").get<double>();
        model.gamma = j.at("gamma").get<double>();
        model.kkt_tolerance = j.at("kkt_tolerance").get<double>();
        for (const auto& pj : j.at("pairs")) {
            SvmPair p;
            p.class_a = pj.at("class_a").get<int>();
            p.class_b = pj.at("class_b").get<int>();
            p.bias = pj.at("bias").get<double>();
            p.support_vectors = mat_from_json(pj.at("support_vectors"));
            p.dual_coefficients = vec_from_json(pj.at("dual_coefficients"));
            model.pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return model;
}

} // namespace ksyn
