#include "icins/box_newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace icins {

namespace {

Vec3 project(const Vec3& x, const Box3& box) {
    return {box[0].clamp(x[0]), box[1].clamp(x[1]), box[2].clamp(x[2])};
}

}  // namespace

double projected_gradient_norm(const Vec3& x, const Eigen::Vector3d& g, const Box3& box) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
        const bool blocked = (x[i] <= box[i].lo && g[i] > 0.0) || (x[i] >= box[i].hi && g[i] < 0.0);
        if (!blocked) s += g[i] * g[i];
    }
    return std::sqrt(s);
}

NewtonResult minimize_on_box(const Objective3& f, const Box3& box, const NewtonSettings& settings,
                             const Vec3& start) {
    NewtonResult res;
    Vec3 x = project(start, box);
    double fx = f.value(x);
    res.x = x;
    res.value = fx;
    if (!std::isfinite(fx)) return res;

    Eigen::Vector3d g;
    Eigen::Matrix3d H;
    for (int it = 0; it < settings.max_iterations; ++it) {
        f.derivatives(x, g, H);
        res.projected_gradient_norm = projected_gradient_norm(x, g, box);
        res.iterations = it;
        if (res.projected_gradient_norm <= settings.gradient_tolerance) {
            res.converged = true;
            break;
        }

        // Coordinates that sit (nearly) on a face with the gradient pushing outward.
        double eps = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double step = x[i] - box[i].clamp(x[i] - g[i]);
            eps += step * step;
        }
        eps = std::min(1e-8, std::sqrt(eps));
        std::array<bool, 3> active{};
        for (int i = 0; i < 3; ++i)
            active[i] = (x[i] <= box[i].lo + eps && g[i] > 0.0) || (x[i] >= box[i].hi - eps && g[i] < 0.0);

        Eigen::Vector3d d = Eigen::Vector3d::Zero();
        std::array<int, 3> free_idx{};
        int nf = 0;
        for (int i = 0; i < 3; ++i)
            if (!active[i]) free_idx[nf++] = i;
        if (nf > 0) {
            Eigen::MatrixXd Hf(nf, nf);
            Eigen::VectorXd gf(nf);
            for (int a = 0; a < nf; ++a) {
                gf[a] = g[free_idx[a]];
                for (int b = 0; b < nf; ++b) Hf(a, b) = H(free_idx[a], free_idx[b]);
            }
            double scale = Hf.diagonal().cwiseAbs().maxCoeff();
            double tau = 0.0;
            Eigen::VectorXd df;
            for (int attempt = 0; attempt < 60; ++attempt) {
                Eigen::MatrixXd Hr = Hf;
                Hr.diagonal().array() += tau;
                Eigen::LLT<Eigen::MatrixXd> llt(Hr);
                if (llt.info() == Eigen::Success) {
                    df = llt.solve(-gf);
                    if (df.allFinite() && gf.dot(df) < 0.0) break;
                }
                tau = tau == 0.0 ? std::max(1e-12, 1e-10 * scale) : 10.0 * tau;
                df.resize(0);
            }
            if (df.size() == 0) df = -gf;
            for (int a = 0; a < nf; ++a) d[free_idx[a]] = df[a];
        }
        for (int i = 0; i < 3; ++i) {
            if (active[i]) d[i] = -g[i] / (H(i, i) > 0.0 ? H(i, i) : 1.0);
        }

        double alpha = 1.0;
        bool accepted = false;
        Vec3 xn{};
        double fn = fx;
        for (int bt = 0; bt < settings.max_backtracks; ++bt) {
            xn = project({x[0] + alpha * d[0], x[1] + alpha * d[1], x[2] + alpha * d[2]}, box);
            fn = f.value(xn);
            double predicted = 0.0;
            for (int i = 0; i < 3; ++i)
                predicted += active[i] ? g[i] * (x[i] - xn[i]) : -alpha * g[i] * d[i];
            const double noise = 1e-14 * (1.0 + std::abs(fx));
            if (std::isfinite(fn) &&
                (fx - fn >= settings.armijo * predicted || (predicted <= noise && fn <= fx + noise))) {
                accepted = true;
                break;
            }
            alpha *= settings.backtrack;
        }
        if (!accepted) break;
        const bool moved = xn != x;
        x = xn;
        fx = fn;
        if (!moved) break;
    }
    res.x = x;
    res.value = fx;
    if (!res.converged) {
        f.derivatives(x, g, H);
        res.projected_gradient_norm = projected_gradient_norm(x, g, box);
        res.converged = res.projected_gradient_norm <= settings.gradient_tolerance;
    }
    return res;
}

}  // namespace icins
