#include "bflow/error.hpp"

namespace bflow {

NumericalError::NumericalError(const std::string& what,
                               std::optional<double> best_estimate,
                               std::optional<double> achieved_error)
    : Error(what), best_(best_estimate), achieved_(achieved_error)
{
}

} // namespace bflow

namespace bflow::detail {

void rethrow_with_context(const std::string& context)
{
    try {
        throw;
    } catch (const DomainError& e) {
        throw DomainError(context + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(context + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(context + ": " + e.what(), e.best_estimate(), e.achieved_error());
    } catch (const std::exception& e) {
        throw Error(context + ": " + e.what());
    }
}

} // namespace bflow::detail
