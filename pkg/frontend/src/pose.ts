// Pose drafting: per-joint axis-angle sliders plus root translation, serialized
// into the flat pose vector the service expects (positions filled via client FK).

import { axisAngleMatrix, forwardKinematics, matMul, matrixToRot6d, rot6dToMatrix, IDENTITY_6D } from "./fk.js";
import type { Vec3 } from "./fk.js";
import type { LayoutDoc, SkeletonDoc } from "./types.js";
import { layoutDim } from "./types.js";

export interface JointAngles {
  x: number; // radians, applied as Rz * Ry * Rx
  y: number;
  z: number;
}

export const ANGLE_LIMIT = Math.PI; // slider clamp

export class PoseDraft {
  readonly skeleton: SkeletonDoc;
  readonly layout: LayoutDoc;
  angles: JointAngles[];
  rootTranslation: Vec3;

  constructor(skeleton: SkeletonDoc, layout: LayoutDoc) {
    this.skeleton = skeleton;
    this.layout = layout;
    this.angles = skeleton.joints.map(() => ({ x: 0, y: 0, z: 0 }));
    this.rootTranslation = [0, 0.9, 0];
  }

  setAngle(joint: number, axis: keyof JointAngles, value: number): void {
    const clamped = Math.max(-ANGLE_LIMIT, Math.min(ANGLE_LIMIT, value));
    this.angles[joint][axis] = clamped;
  }

  rotations6d(): number[][] {
    return this.angles.map((a) => {
      if (a.x === 0 && a.y === 0 && a.z === 0) return [...IDENTITY_6D];
      const rx = axisAngleMatrix([1, 0, 0], a.x);
      const ry = axisAngleMatrix([0, 1, 0], a.y);
      const rz = axisAngleMatrix([0, 0, 1], a.z);
      return matrixToRot6d(matMul(rz, matMul(ry, rx)));
    });
  }

  /** Global joint positions of the drafted pose (client-side FK preview). */
  positions(): Vec3[] {
    return forwardKinematics(this.skeleton, this.rotations6d(), this.rootTranslation);
  }

  /** Flat D-vector: rotations | root translation | shape zeros | contact zeros | positions. */
  toPoseVector(): number[] {
    const dim = layoutDim(this.layout);
    const out = new Array<number>(dim).fill(0);
    const rots = this.rotations6d();
    for (let j = 0; j < this.layout.num_joints; j++) {
      for (let c = 0; c < 6; c++) out[6 * j + c] = rots[j][c];
    }
    const rootAt = 6 * this.layout.num_joints;
    out[rootAt] = this.rootTranslation[0];
    out[rootAt + 1] = this.rootTranslation[1];
    out[rootAt + 2] = this.rootTranslation[2];
    const posAt = rootAt + 3 + this.layout.shape_dims + this.layout.contact_dims;
    const pos = this.positions();
    for (let j = 0; j < this.layout.num_joints; j++) {
      out[posAt + 3 * j] = pos[j][0];
      out[posAt + 3 * j + 1] = pos[j][1];
      out[posAt + 3 * j + 2] = pos[j][2];
    }
    return out;
  }

  static fromPoseVector(skeleton: SkeletonDoc, layout: LayoutDoc, pose: number[]): PoseDraft {
    // Angles are not recoverable in general; keep the vector's root and treat
    // the rotations as opaque (used when importing poses from a library file).
    const draft = new PoseDraft(skeleton, layout);
    const rootAt = 6 * layout.num_joints;
    draft.rootTranslation = [pose[rootAt], pose[rootAt + 1], pose[rootAt + 2]];
    return draft;
  }
}

export interface LibraryPose {
  name: string;
  pose: number[];
}

/**
 * Parse a pose-library file: either {"poses":[{"name","pose"}]} or a motion
 * document {"frames":[[...]]} whose frames become selectable poses.
 */
export function parsePoseLibrary(doc: unknown, expectedDim: number): LibraryPose[] {
  const data = doc as { poses?: LibraryPose[]; frames?: number[][] };
  let poses: LibraryPose[] = [];
  if (Array.isArray(data.poses)) {
    poses = data.poses.map((p, i) => ({ name: p.name ?? `pose ${i}`, pose: p.pose }));
  } else if (Array.isArray(data.frames)) {
    poses = data.frames.map((row, i) => ({ name: `frame ${i}`, pose: row }));
  } else {
    throw new Error("pose library needs a 'poses' or 'frames' array");
  }
  for (const p of poses) {
    if (!Array.isArray(p.pose) || p.pose.length !== expectedDim) {
      throw new Error(`pose ${p.name}: expected ${expectedDim} values`);
    }
  }
  return poses;
}

/** Positions straight from an arbitrary pose vector (for rendering library poses). */
export function poseVectorPositions(
  skeleton: SkeletonDoc,
  layout: LayoutDoc,
  pose: number[],
): Vec3[] {
  const rots: number[][] = [];
  for (let j = 0; j < layout.num_joints; j++) rots.push(pose.slice(6 * j, 6 * j + 6));
  const rootAt = 6 * layout.num_joints;
  return forwardKinematics(skeleton, rots, [pose[rootAt], pose[rootAt + 1], pose[rootAt + 2]]);
}
