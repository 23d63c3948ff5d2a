"""Two-stage high-resolution image inpainting.

Stage one restores structure at a fixed working resolution; stage two
restores texture at native resolution with a shift-channel refinement
network fed a 20-channel stack (five RGB images plus five masks).
"""

__version__ = "0.1.0"
