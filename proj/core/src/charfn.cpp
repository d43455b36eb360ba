// SPDX-License-Identifier: MIT
#include "ddeps/charfn.hpp"

#include "ddeps/error.hpp"

namespace ddeps {

Eigen::MatrixXcd CharFn::combine(const std::vector<Eigen::MatrixXd>& mats, const Eigen::VectorXcd& v) const {
    const int d = dim();
    Eigen::MatrixXcd S = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t k = 0; k < mats.size(); ++k) S += mats[k].cast<cd>() * v(static_cast<Eigen::Index>(k));
    return S;
}

Eigen::MatrixXcd CharFn::eval(cd lambda) const {
    const int d = dim();
    return lambda * Eigen::MatrixXcd::Identity(d, d) - combine(linear_.C, lag_values(lambda));
}

Eigen::MatrixXcd CharFn::dlambda(cd lambda) const {
    const int d = dim();
    return Eigen::MatrixXcd::Identity(d, d) - combine(linear_.C, lag_values_dlambda(lambda));
}

Eigen::MatrixXcd CharFn::dalpha(cd lambda, const std::string& param) const {
    auto it = linear_.dC.find(param);
    if (it == linear_.dC.end())
        throw Error(ErrorKind::InvalidArgument, "no parameter derivative registered for '" + param + "'");
    return -combine(it->second, lag_values(lambda));
}

}  // namespace ddeps
