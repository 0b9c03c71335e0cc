#pragma once

#include <cstdio>
#include <string>

#include <Eigen/Dense>

namespace hesmc {

/// 17-significant-digit decimal form; round-trips IEEE doubles exactly.
inline std::string str17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string json_array17(const Eigen::VectorXd& v) {
    std::string s = "[";
    for (int i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += str17(v(i));
    }
    return s + "]";
}

inline std::string json_array17(const Eigen::RowVectorXd& v) {
    return json_array17(Eigen::VectorXd(v.transpose()));
}

/// Row-major nested arrays.
inline std::string json_matrix17(const Eigen::MatrixXd& M) {
    std::string s = "[";
    for (int i = 0; i < M.rows(); ++i) {
        if (i) s += ",";
        s += json_array17(Eigen::VectorXd(M.row(i).transpose()));
    }
    return s + "]";
}

}  // namespace hesmc
