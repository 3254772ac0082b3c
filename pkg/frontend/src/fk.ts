// Client-side forward kinematics mirroring the server's math: 6D rotation
// vectors orthonormalized by Gram-Schmidt, positions accumulated down the tree.

import type { SkeletonDoc } from "./types.js";

export type Vec3 = [number, number, number];
export type Mat3 = [Vec3, Vec3, Vec3]; // row-major

export const IDENTITY_6D = [1, 0, 0, 0, 1, 0];

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function norm(a: Vec3): number {
  return Math.sqrt(dot(a, a));
}

function scale(a: Vec3, s: number): Vec3 {
  return [a[0] * s, a[1] * s, a[2] * s];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function add(a: Vec3, b: Vec3): Vec3 {
  return [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

/** Columns b1, b2, b3 as a row-major matrix. */
function columnsToMatrix(b1: Vec3, b2: Vec3, b3: Vec3): Mat3 {
  return [
    [b1[0], b2[0], b3[0]],
    [b1[1], b2[1], b3[1]],
    [b1[2], b2[2], b3[2]],
  ];
}

export function rot6dToMatrix(r: number[]): Mat3 {
  const a1: Vec3 = [r[0], r[1], r[2]];
  const a2: Vec3 = [r[3], r[4], r[5]];
  const n1 = norm(a1);
  if (n1 < 1e-8) throw new Error("degenerate 6D rotation");
  const b1 = scale(a1, 1 / n1);
  const proj = sub(a2, scale(b1, dot(b1, a2)));
  const n2 = norm(proj);
  if (n2 < 1e-8) throw new Error("degenerate 6D rotation");
  const b2 = scale(proj, 1 / n2);
  return columnsToMatrix(b1, b2, cross(b1, b2));
}

export function matrixToRot6d(m: Mat3): number[] {
  return [m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]];
}

export function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: Mat3 = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++)
      out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
  return out;
}

export function matVec(m: Mat3, v: Vec3): Vec3 {
  return [dot(m[0], v), dot(m[1], v), dot(m[2], v)];
}

/** Rodrigues rotation about a unit axis. */
export function axisAngleMatrix(axis: Vec3, angle: number): Mat3 {
  const [kx, ky, kz] = axis;
  const c = Math.cos(angle);
  const s = Math.sin(angle);
  const t = 1 - c;
  return [
    [c + kx * kx * t, kx * ky * t - kz * s, kx * kz * t + ky * s],
    [ky * kx * t + kz * s, c + ky * ky * t, ky * kz * t - kx * s],
    [kz * kx * t - ky * s, kz * ky * t + kx * s, c + kz * kz * t],
  ];
}

/**
 * Global joint positions for per-joint 6D rotations and a root translation.
 * rotations: J x 6 (same joint order as the skeleton doc).
 */
export function forwardKinematics(
  skeleton: SkeletonDoc,
  rotations: number[][],
  rootTranslation: Vec3,
): Vec3[] {
  const numJ = skeleton.joints.length;
  const globalR: Mat3[] = new Array(numJ);
  const pos: Vec3[] = new Array(numJ);
  globalR[0] = rot6dToMatrix(rotations[0]);
  pos[0] = [...rootTranslation] as Vec3;
  for (let j = 1; j < numJ; j++) {
    const joint = skeleton.joints[j];
    const parent = joint.parent;
    pos[j] = add(pos[parent], matVec(globalR[parent], joint.offset as Vec3));
    globalR[j] = matMul(globalR[parent], rot6dToMatrix(rotations[j]));
  }
  return pos;
}

export function restPositions(skeleton: SkeletonDoc): Vec3[] {
  const rot = skeleton.joints.map(() => IDENTITY_6D);
  return forwardKinematics(skeleton, rot, [0, 0, 0]);
}
