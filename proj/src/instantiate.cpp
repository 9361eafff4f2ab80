#include "mtot/pcr.hpp"
#include "mtot/solver.hpp"
#include "mtot/tuning.hpp"

namespace mtot {

template struct Dataset<double>;
template MtotModel<double> fit<double>(const Dataset<double>&, const FitConfig&, const BasisCache<double>*);
template Tensor<double> predict<double>(const MtotModel<double>&, std::span<const Tensor<double>>);
template BasisCache<double> compute_basis_cache<double>(const Dataset<double>&, InputBasis);
template CvReport cross_validate<double>(const Dataset<double>&, const RankGrid&, int, std::uint64_t, const FitConfig&);
template RankGrid make_rank_grid<double>(const Dataset<double>&);
template PcrModel<double> pcr_fit<double>(const Dataset<double>&, double);
template Tensor<double> pcr_predict<double>(const PcrModel<double>&, std::span<const Tensor<double>>);
template PcrCvResult<double> pcr_cv<double>(const Dataset<double>&, int, std::uint64_t, std::vector<double>);

}  // namespace mtot
