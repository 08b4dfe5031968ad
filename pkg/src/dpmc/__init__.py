"""dpmc: light scattering by spherical particles and Monte Carlo rendering
of discrete particle clouds.

Layers, bottom up: special functions (specfun), rigorous Lorenz-Mie series
(mie), geometrical-optics approximation (goa), the hybrid single-particle
facade with precomputed tables (scatter), particle size distributions and
clouds (particles), grid-accelerated local queries (medium), and the
spectral Monte Carlo renderer (render).  The `dpmc` console script fronts
the whole stack.
"""

__version__ = "0.1.0"

from .types import AmplitudePair
from .mie import (MieInput, MieCoefficients, mie_coefficients, mie_amplitudes,
                  mie_amplitudes_grid, mie_extinction_cross_section,
                  mie_scattering_cross_section, mie_phase_function)
from .goa import (GoaInput, RayOrderContribution, TotalInternalReflection,
                  fraunhofer_amplitude, deflection_angle, solve_incident_angles,
                  emergent_amplitude, goa_amplitudes, goa_amplitudes_grid,
                  goa_extinction_cross_section, goa_extinction_p1_closed_form,
                  goa_absorption_cross_section, effective_index, rainbow_angles)
from .scatter import (HybridPolicy, ParticleOptics, amplitudes, cross_sections,
                      single_particle_phase, build_phase_table, OpticsTables)
from .particles import (SizeDistribution, ParticleRecord, ParticleCloud,
                        sample_radius, generate_cloud, estimate_local_psd,
                        global_bulk_properties, save_particle_file,
                        load_particle_file)
from .medium import (UniformGrid, QueryCylinder, build_grid, traverse, gather,
                     transmittance, local_q, footprint_cross_section)
from .scene import Scene, load_scene, save_scene
from .render import (SpectralImage, render, render_continuous,
                     sample_path_vertex, direct_lighting, spectral_to_srgb,
                     write_pfm, read_pfm, write_png)
