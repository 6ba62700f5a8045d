#ifndef STOCHQUAD_H
#define STOCHQUAD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SqStatus {
  SQ_STATUS_OK = 0,
  SQ_STATUS_INVALID_ARGUMENT = 1,
  SQ_STATUS_RESOURCE_EXHAUSTED = 2,
  SQ_STATUS_NON_FINITE = 3,
  SQ_STATUS_IO = 4,
  SQ_STATUS_FORMAT = 5,
  SQ_STATUS_NULL_POINTER = 6,
  SQ_STATUS_BUFFER_TOO_SMALL = 7,
  SQ_STATUS_PANIC = 8,
} SqStatus;

// A rule on its uniform mesh, with its own random stream.
typedef struct SqGlobalRule SqGlobalRule;

// Trial-network parameters.
typedef struct SqNetwork SqNetwork;

// Integrand callback: `x` points to `dim` coordinates.
typedef double (*SqIntegrand)(const double *x, uint32_t dim, void *user_data);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Length in bytes of the last error message, excluding the terminator.
size_t sq_last_error_length(void);

// Copy the last error message into `buf` (NUL-terminated, truncated to
// `len − 1` bytes). Returns the full message length.
size_t sq_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *sq_version(void);

// Create `rule_id` (e.g. `"p2tri"`) on the uniform mesh with `n` cells per
// axis (`n` points for `"mc"`), drawing from the stream of `seed`.
enum SqStatus sq_global_rule_new(const char *rule_id,
                                 uint32_t dim,
                                 size_t n,
                                 uint64_t seed,
                                 struct SqGlobalRule **out);

// Release a rule handle. Null is ignored.
void sq_global_rule_free(struct SqGlobalRule *rule);

// Nodes per global draw.
enum SqStatus sq_global_rule_points(const struct SqGlobalRule *rule, size_t *out);

// Spatial dimension of the rule.
enum SqStatus sq_global_rule_dim(const struct SqGlobalRule *rule, uint32_t *out);

// One stochastic estimate of `∫_{[0,1]^d} f`.
enum SqStatus sq_global_rule_integrate(struct SqGlobalRule *rule,
                                       SqIntegrand f,
                                       void *user_data,
                                       double *out);

// Draw one global sample into caller buffers: `nodes` holds
// `capacity × dim` doubles, `weights` holds `capacity`. `written` receives
// the node count; if it exceeds `capacity`, nothing is drawn and
// `SQ_STATUS_BUFFER_TOO_SMALL` is returned.
enum SqStatus sq_global_rule_sample(struct SqGlobalRule *rule,
                                    double *nodes,
                                    double *weights,
                                    size_t capacity,
                                    size_t *written);

// Freshly initialised `d → 30 → 30 → 30 → 1` network.
enum SqStatus sq_network_new(uint32_t dim, uint64_t seed, struct SqNetwork **out);

// Load parameters saved as `.json` or binary.
enum SqStatus sq_network_load(const char *path, struct SqNetwork **out);

enum SqStatus sq_network_save(const struct SqNetwork *net, const char *path);

// Release a network handle. Null is ignored.
void sq_network_free(struct SqNetwork *net);

enum SqStatus sq_network_parameter_count(const struct SqNetwork *net, size_t *out);

// `u(x)` and, if `grad` is non-null, `∇u(x)` (`dim` doubles).
enum SqStatus sq_network_evaluate(const struct SqNetwork *net,
                                  const double *x,
                                  double *u,
                                  double *grad);

// Stochastic loss `Σ wⱼ(½|∇u|² + f u)` on one draw of `rule`, and its
// parameter gradient written to `grad` (`sq_network_parameter_count` doubles;
// may be null).
enum SqStatus sq_network_loss(const struct SqNetwork *net,
                              struct SqGlobalRule *rule,
                              double *loss,
                              double *grad);

// Minimum of the continuum loss, `−½‖∇u*‖²`, for the manufactured problem.
enum SqStatus sq_exact_loss_minimum(uint32_t dim, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCHQUAD_H */
