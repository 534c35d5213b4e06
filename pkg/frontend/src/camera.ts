/**
 * Orbit camera state: spherical coordinates around a target point, with
 * zoom clamping and exact reset. Pure math; the viewer copies the derived
 * eye/target into the three.js camera each frame.
 */

import type { Vec3 } from "./picking.js";

export interface OrbitState {
  theta: number; // azimuth, radians
  phi: number; // polar angle from +y, radians, clamped away from the poles
  radius: number;
  target: Vec3;
}

export interface OrbitLimits {
  minRadius: number;
  maxRadius: number;
}

const PHI_EPS = 1e-3;

export function clone(state: OrbitState): OrbitState {
  return { ...state, target: [...state.target] as unknown as Vec3 };
}

export function orbit(state: OrbitState, dTheta: number, dPhi: number): OrbitState {
  return {
    ...clone(state),
    theta: state.theta + dTheta,
    phi: Math.min(Math.PI - PHI_EPS, Math.max(PHI_EPS, state.phi + dPhi)),
  };
}

export function zoom(state: OrbitState, factor: number, limits: OrbitLimits): OrbitState {
  const radius = Math.min(limits.maxRadius, Math.max(limits.minRadius, state.radius * factor));
  return { ...clone(state), radius };
}

export function pan(state: OrbitState, dx: number, dy: number): OrbitState {
  // pan in the camera plane: right = d(eye)/d(theta) direction, up = world-ish up
  const sinPhi = Math.sin(state.phi);
  const right: Vec3 = [Math.cos(state.theta), 0, -Math.sin(state.theta)];
  const up: Vec3 = [
    -Math.cos(state.phi) * Math.sin(state.theta),
    sinPhi,
    -Math.cos(state.phi) * Math.cos(state.theta),
  ];
  const t = state.target;
  return {
    ...clone(state),
    target: [
      t[0] + right[0] * dx + up[0] * dy,
      t[1] + right[1] * dx + up[1] * dy,
      t[2] + right[2] * dx + up[2] * dy,
    ],
  };
}

export function eyePosition(state: OrbitState): Vec3 {
  const { theta, phi, radius, target } = state;
  return [
    target[0] + radius * Math.sin(phi) * Math.sin(theta),
    target[1] + radius * Math.cos(phi),
    target[2] + radius * Math.sin(phi) * Math.cos(theta),
  ];
}

/** Controller owning the state plus the frozen initial pose for reset. */
export class OrbitController {
  private state: OrbitState;
  private readonly initial: OrbitState;

  constructor(initial: OrbitState, public readonly limits: OrbitLimits) {
    this.initial = clone(initial);
    this.state = clone(initial);
  }

  get current(): OrbitState {
    return clone(this.state);
  }

  orbit(dTheta: number, dPhi: number): void {
    this.state = orbit(this.state, dTheta, dPhi);
  }

  zoom(factor: number): void {
    this.state = zoom(this.state, factor, this.limits);
  }

  pan(dx: number, dy: number): void {
    this.state = pan(this.state, dx, dy);
  }

  /** Restore the exact initial pose. */
  reset(): void {
    this.state = clone(this.initial);
  }

  eye(): Vec3 {
    return eyePosition(this.state);
  }
}
