/**
 * The slice of the device model the overlays need: the flux dispersion,
 * its period average under a sine drive, and the resonance-condition
 * curves w_m(A) = (w_r - w_bar(A)) / (n * alpha).  Device parameters come
 * from the run metadata (SI angular frequencies).
 */

export interface DeviceMeta {
  omega_max: number;
  eta: number;
  omega_r: number;
  g_qr: number;
  flux_validity: number;
}

export function qubitFrequency(dev: DeviceMeta, phi: number): number {
  const etaAbs = -dev.eta;
  return (
    (dev.omega_max + etaAbs) * Math.sqrt(Math.abs(Math.cos(Math.PI * phi))) -
    etaAbs
  );
}

/** Period-averaged qubit frequency under park + A*sin drive (trapezoid rule). */
export function meanFrequency(
  dev: DeviceMeta,
  park: number,
  amplitude: number,
  samples = 4096
): number {
  let total = 0;
  for (let i = 0; i < samples; i++) {
    const phi = park + amplitude * Math.sin((2 * Math.PI * i) / samples);
    total += qubitFrequency(dev, phi);
  }
  return total / samples;
}

/** Modulation frequency (MHz) bridging the n-th sideband at drive amplitude A. */
export function resonanceCurveMhz(
  dev: DeviceMeta,
  park: number,
  amplitude: number,
  order: number,
  alpha = 2
): number {
  const deltaBar = meanFrequency(dev, park, amplitude) - dev.omega_r;
  return -deltaBar / (order * alpha) / (2e6 * Math.PI);
}

export function radToMhz(omega: number): number {
  return omega / (2e6 * Math.PI);
}
