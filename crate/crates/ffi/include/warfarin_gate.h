#ifndef WARFARIN_GATE_H
#define WARFARIN_GATE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define WG_RACE_MISSING 0

#define WG_RACE_WHITE 1

#define WG_RACE_AFRICAN_AMERICAN 2

#define WG_RACE_ASIAN 3

/*
 Label written for a patient the dose model should not be used on.
 */
#define WG_LABEL_HIGH_RISK 1

/*
 Label written for a patient the dose model is expected to serve.
 */
#define WG_LABEL_SAFE -1

/*
 Result code of every call.
 */
typedef enum WgStatus {
  WG_STATUS_OK = 0,
  WG_STATUS_NULL_POINTER = 1,
  WG_STATUS_INVALID_ARGUMENT = 2,
  WG_STATUS_IO = 3,
  WG_STATUS_DATA = 4,
  WG_STATUS_NUMERICAL = 5,
  WG_STATUS_PANIC = 6,
} WgStatus;

/*
 Trained gate classifier.
 */
typedef struct WgModel WgModel;

/*
 Inputs of the IWPC dose model.
 */
typedef struct WgCovariates {
  /*
   Completed decades of age, 0 to 9.
   */
  uint8_t age_decade;
  double height_cm;
  double weight_kg;
  /*
   One of the `WG_RACE_*` codes.
   */
  uint8_t race;
  /*
   Nonzero when taking carbamazepine, phenytoin or rifampin.
   */
  uint8_t enzyme;
  uint8_t amiodarone;
} WgCovariates;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null after a
 success. Valid until the next call on the same thread.
 */
const char *wg_last_error_message(void);

/*
 Load a model file.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WgStatus wg_model_load(const char *path, struct WgModel **out);

/*
 Parse a model from its text serialization.

 # Safety
 `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WgStatus wg_model_from_str(const char *text, struct WgModel **out);

/*
 Release a model. Null is ignored.

 # Safety
 `model` must come from `wg_model_load` or `wg_model_from_str` and not
 have been freed.
 */
void wg_model_free(struct WgModel *model);

/*
 Number of features the model expects; 0 for a null model.

 # Safety
 `model` must be null or a live handle.
 */
size_t wg_model_n_features(const struct WgModel *model);

/*
 Name of feature `index`, owned by the model; null when out of range.

 # Safety
 `model` must be null or a live handle.
 */
const char *wg_model_feature_name(const struct WgModel *model, size_t index);

/*
 Decision value for raw (unscaled) features in the model's order.

 # Safety
 `x` must point to `len` doubles and `out` to one double.
 */
enum WgStatus wg_model_decision_value(const struct WgModel *model,
                                      const double *x,
                                      size_t len,
                                      double *out);

/*
 Gate label (`WG_LABEL_*`) for raw features in the model's order.

 # Safety
 `x` must point to `len` doubles and `out` to one int.
 */
enum WgStatus wg_model_predict(const struct WgModel *model,
                               const double *x,
                               size_t len,
                               int32_t *out);

/*
 Weekly warfarin dose (mg/week) from the published IWPC coefficients.

 # Safety
 `covariates` and `out` must be valid pointers.
 */
enum WgStatus wg_iwpc_weekly_dose(const struct WgCovariates *covariates, double *out);

/*
 Ground-truth gate label: high-risk when the relative dose error
 exceeds `threshold`.

 # Safety
 `out` must be a valid pointer.
 */
enum WgStatus wg_gate_label(double predicted_mg_week,
                            double therapeutic_mg_week,
                            double threshold,
                            int32_t *out);

/*
 Root mean squared error of two equally long arrays.

 # Safety
 `actual` and `predicted` must point to `len` doubles, `out` to one.
 */
enum WgStatus wg_rmse(const double *actual, const double *predicted, size_t len, double *out);

/*
 Mean absolute error of two equally long arrays.

 # Safety
 `actual` and `predicted` must point to `len` doubles, `out` to one.
 */
enum WgStatus wg_mae(const double *actual, const double *predicted, size_t len, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WARFARIN_GATE_H */
