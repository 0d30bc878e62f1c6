/** Forward kinematics of the two-link arm, mirroring the simulator:
 * shoulder at the origin, joints = [abduction about -y, flexion about
 * the rotated x, internal rotation about -z, elbow about -y], link
 * lengths 0.30 m (upper) and 0.35 m (forearm).
 */

type Mat3 = number[][];

const L1 = 0.3;
const L2 = 0.35;

function matMul(a: Mat3, b: Mat3): Mat3 {
  const out: Mat3 = [
    [0, 0, 0],
    [0, 0, 0],
    [0, 0, 0],
  ];
  for (let i = 0; i < 3; i++)
    for (let j = 0; j < 3; j++)
      for (let k = 0; k < 3; k++) out[i][j] += a[i][k] * b[k][j];
  return out;
}

function rotAboutNegY(q: number): Mat3 {
  const c = Math.cos(q), s = Math.sin(q);
  return [
    [c, 0, -s],
    [0, 1, 0],
    [s, 0, c],
  ];
}

function rotAboutX(q: number): Mat3 {
  const c = Math.cos(q), s = Math.sin(q);
  return [
    [1, 0, 0],
    [0, c, -s],
    [0, s, c],
  ];
}

function rotAboutNegZ(q: number): Mat3 {
  const c = Math.cos(q), s = Math.sin(q);
  return [
    [c, s, 0],
    [-s, c, 0],
    [0, 0, 1],
  ];
}

/** [shoulder, elbow, fingertip] world positions for joint angles qpos. */
export function skeletonPositions(qpos: number[]): number[][] {
  const r1 = rotAboutNegY(qpos[0]);
  const r12 = matMul(r1, rotAboutX(qpos[1]));
  const rs = matMul(r12, rotAboutNegZ(qpos[2]));
  const rf = matMul(rs, rotAboutNegY(qpos[3]));
  // link directions are the negated third columns of the rotation frames
  const upperDir = [-rs[0][2], -rs[1][2], -rs[2][2]];
  const foreDir = [-rf[0][2], -rf[1][2], -rf[2][2]];
  const elbow = upperDir.map((v) => L1 * v);
  const tip = elbow.map((v, i) => v + L2 * foreDir[i]);
  return [[0, 0, 0], elbow, tip];
}
