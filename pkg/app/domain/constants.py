CG_RESIDUAL_TOL = 1e-10
CG_MAX_ITERS_SLACK = 5

INIT_TAU = 1e-3

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Umbrales pre-registrados de las verificaciones estadísticas
Z_SCORE_MAX = 5.0
CONSISTENCY_Z_MAX = 4.0
VARIANCE_SLACK_SE = 3.0
EQUIVALENCE_TOL = 1e-9
ORACLE_TOL = 1e-8
PROJECTION_TOL = 1e-8
COVARIANCE_FROBENIUS_TOL = 0.02
FD_STEP = 1e-5
FD_REL_TOL = 1e-4

PINV_EIG_RTOL = 1e-12
# Corte de valores singulares en la proyección de capas con ruido compartido
PINV_SV_RTOL = 1e-10
JACOBI_MAX_SWEEPS = 100
