"""sparsepose: full-body pose estimation from sparse consumer-device IMUs.

Submodules:
  rotmath   rotation representations and conversions
  body      24-joint skeleton, forward kinematics, skinned vertices
  combos    device-position states and the 24 location combinations
  synth     synthetic IMU generation, smoothing, masking, file formats
  calib     device-to-global alignment and T-pose offsets
  net       the pose network: training, inference, weight files
  refine    per-frame IK refinement against measured orientations
  metrics   MPJRE / MPJPE / MPJVE / Jitter and report tables
  tracker   active-device placement state machine
  stream    wire protocol, replay, and the 25 Hz aggregator
  motions   procedural motion generation
  cli       command-line interface
"""

__version__ = "0.1.0"
