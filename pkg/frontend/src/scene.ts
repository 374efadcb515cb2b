// Procedural 3D model: the kinematic tree is built straight from the
// robot description's link geometry (boxes and cylinders only, no mesh
// assets). Joints are Groups whose quaternion is set from the declared
// axis and the latest angle, so the displayed pose is the forward
// kinematics of the received joint state.
//
// The description uses z-up robot coordinates; the whole model sits in a
// z-up root group that is rotated once into three.js y-up world space.

import * as THREE from 'three';
import type { JointName, RobotDescription } from './protocol.js';
import { JOINT_ORDER } from './protocol.js';

const LINK_COLORS: Record<string, number> = {
  base_link: 0x37474f,
  torso: 0x546e7a,
  neck: 0x455a64,
  head: 0x78909c,
  left_arm_link: 0x6d8796,
  right_arm_link: 0x6d8796,
};

export interface RobotModel {
  root: THREE.Group;
  setJointAngle(joint: JointName, radians: number): void;
}

function linkMesh(shape: string, size: [number, number, number],
                  name: string): THREE.Mesh {
  const color = LINK_COLORS[name] ?? 0x607d8b;
  const material = new THREE.MeshStandardMaterial({ color });
  let geometry: THREE.BufferGeometry;
  if (shape === 'cylinder') {
    geometry = new THREE.CylinderGeometry(size[0], size[1], size[2], 24);
    geometry.rotateX(Math.PI / 2); // cylinder axis along z in robot frame
  } else {
    geometry = new THREE.BoxGeometry(size[0], size[1], size[2]);
  }
  const mesh = new THREE.Mesh(geometry, material);
  mesh.position.z = size[2] / 2; // links extend upward from their joint
  mesh.name = `${name}-mesh`;
  return mesh;
}

export function buildRobotModel(desc: RobotDescription): RobotModel {
  const root = new THREE.Group();
  root.name = 'robot-root';
  root.rotation.x = -Math.PI / 2; // robot z-up -> three.js y-up

  const links = new Map<string, THREE.Group>();
  const base = new THREE.Group();
  base.name = 'base_link';
  const baseMesh = new THREE.Mesh(
    new THREE.CylinderGeometry(0.11, 0.12, 0.04, 32),
    new THREE.MeshStandardMaterial({ color: LINK_COLORS.base_link }));
  baseMesh.geometry.rotateX(Math.PI / 2);
  baseMesh.position.z = 0.02;
  base.add(baseMesh);
  root.add(base);
  links.set('base_link', base);

  const joints = new Map<JointName, { group: THREE.Group; axis: THREE.Vector3 }>();
  const pending = new Set<JointName>(JOINT_ORDER);
  while (pending.size > 0) {
    let attached = false;
    for (const joint of Array.from(pending)) {
      const spec = desc.joints[joint];
      const parent = links.get(spec.parent);
      if (parent === undefined) continue;
      const group = new THREE.Group();
      group.name = spec.child;
      group.position.set(...spec.origin);
      group.add(linkMesh(spec.shape, spec.size, spec.child));
      parent.add(group);
      links.set(spec.child, group);
      joints.set(joint, {
        group,
        axis: new THREE.Vector3(...spec.axis).normalize(),
      });
      pending.delete(joint);
      attached = true;
    }
    if (!attached) throw new Error('robot description tree is not rooted');
  }

  // the head carries the face display as a thin plate
  const head = links.get('head');
  if (head !== undefined) {
    const plate = new THREE.Mesh(
      new THREE.BoxGeometry(0.002, 0.12, 0.08),
      new THREE.MeshStandardMaterial({
        color: 0x101418, emissive: 0x2d6cdf, emissiveIntensity: 0.35,
      }));
    plate.position.set(0.091, 0, 0.06);
    plate.name = 'face-display';
    head.add(plate);
  }

  return {
    root,
    setJointAngle(joint: JointName, radians: number): void {
      const entry = joints.get(joint);
      if (entry === undefined) return;
      entry.group.quaternion.setFromAxisAngle(entry.axis, radians);
    },
  };
}

export interface TwinScene {
  scene: THREE.Scene;
  camera: THREE.PerspectiveCamera;
  model: RobotModel;
}

export function buildScene(desc: RobotDescription,
                           aspect: number): TwinScene {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x14181d);

  const grid = new THREE.GridHelper(2.0, 20, 0x3a4750, 0x232b32);
  scene.add(grid);

  const key = new THREE.DirectionalLight(0xffffff, 2.2);
  key.position.set(1.5, 2.0, 1.0);
  scene.add(key);
  scene.add(new THREE.AmbientLight(0x8899aa, 0.8));

  const model = buildRobotModel(desc);
  scene.add(model.root);

  const camera = new THREE.PerspectiveCamera(45, aspect, 0.01, 20);
  camera.position.set(0.7, 0.55, 0.8);
  camera.lookAt(0, 0.22, 0);

  return { scene, camera, model };
}
