"""Physical constants of the benchmark control tasks.

Cart-pole: Barto, Sutton & Anderson (1983), "Neuronlike adaptive elements
that can solve difficult learning control problems", IEEE SMC 13(5).
Acrobot: Sutton (1996), "Generalization in reinforcement learning:
successful examples using sparse coarse coding", NIPS 8; equations of
motion as in Sutton & Barto, "Reinforcement Learning: An Introduction".

Normalization bounds for velocities are not part of either source; they
cover observed rollouts and can be overridden through ``env.bounds.*``.
"""

import math

# cart-pole
CARTPOLE_GRAVITY = 9.8
CARTPOLE_MASS_CART = 1.0
CARTPOLE_MASS_POLE = 0.1
CARTPOLE_HALF_LENGTH = 0.5
CARTPOLE_FORCE = 10.0
CARTPOLE_TAU = 0.02
CARTPOLE_X_LIMIT = 2.4
CARTPOLE_THETA_LIMIT = 12.0 * 2.0 * math.pi / 360.0
CARTPOLE_CAP = 200
CARTPOLE_INIT_RANGE = 0.05
CARTPOLE_LOW = (-CARTPOLE_X_LIMIT, -3.0, -CARTPOLE_THETA_LIMIT, -3.5)
CARTPOLE_HIGH = (CARTPOLE_X_LIMIT, 3.0, CARTPOLE_THETA_LIMIT, 3.5)

# acrobot
ACROBOT_LINK_LENGTH_1 = 1.0
ACROBOT_LINK_MASS_1 = 1.0
ACROBOT_LINK_MASS_2 = 1.0
ACROBOT_LINK_COM_1 = 0.5
ACROBOT_LINK_COM_2 = 0.5
ACROBOT_LINK_MOI = 1.0
ACROBOT_GRAVITY = 9.8
ACROBOT_DT = 0.2
ACROBOT_MAX_VEL_1 = 4.0 * math.pi
ACROBOT_MAX_VEL_2 = 9.0 * math.pi
ACROBOT_GOAL_HEIGHT = 1.0
ACROBOT_CAP = 500
ACROBOT_INIT_RANGE = 0.1
ACROBOT_LOW = (-math.pi, -math.pi, -ACROBOT_MAX_VEL_1, -ACROBOT_MAX_VEL_2)
ACROBOT_HIGH = (math.pi, math.pi, ACROBOT_MAX_VEL_1, ACROBOT_MAX_VEL_2)
