// Canvas renderer for the live map: room bounds, shelves, trajectories,
// detection markers (darker, labelled), live poses and draft waypoints.
//
// Drawing goes through a minimal context interface so tests can record
// exactly where markers land.

import {
  Viewport,
  altitudeTint,
  detectionColor,
  robotColor,
  worldToPx,
} from './projection.js';
import type { ObjectAsset, PoseEvent, TrajectoryPoint, WorldSpec } from './types.js';

export interface DrawContext {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  rect(x: number, y: number, w: number, h: number): void;
  fill(): void;
  stroke(): void;
  closePath(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
}

export interface MapScene {
  world: WorldSpec | null;
  trajectories: Record<string, TrajectoryPoint[]>;
  poses: Record<string, PoseEvent>;
  objects: ObjectAsset[];
  robotIds: string[];
  draftWaypoints: [number, number, number][];
  aerialRobots: Set<string>;
}

export const DETECTION_RADIUS_PX = 5;

export function renderScene(ctx: DrawContext, view: Viewport, scene: MapScene): void {
  ctx.clearRect(0, 0, view.widthPx, view.heightPx);
  drawRoom(ctx, view, scene.world);
  for (const robotId of scene.robotIds) {
    drawTrajectory(ctx, view, scene, robotId);
  }
  for (const obj of scene.objects) {
    drawDetection(ctx, view, obj, scene.robotIds);
  }
  for (const robotId of scene.robotIds) {
    const pose = scene.poses[robotId];
    if (pose) {
      drawPose(ctx, view, pose, scene);
    }
  }
  drawDraftWaypoints(ctx, view, scene.draftWaypoints);
}

function drawRoom(ctx: DrawContext, view: Viewport, world: WorldSpec | null): void {
  if (!world) {
    return;
  }
  const origin = worldToPx(view, 0, world.height);
  const corner = worldToPx(view, world.width, 0);
  ctx.strokeStyle = '#555';
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.rect(origin.px, origin.py, corner.px - origin.px, corner.py - origin.py);
  ctx.stroke();
  ctx.strokeStyle = '#997744';
  ctx.lineWidth = 4;
  for (const shelf of world.shelves) {
    const a = worldToPx(view, shelf.x1, shelf.y1);
    const b = worldToPx(view, shelf.x2, shelf.y2);
    ctx.beginPath();
    ctx.moveTo(a.px, a.py);
    ctx.lineTo(b.px, b.py);
    ctx.stroke();
  }
}

function drawTrajectory(
  ctx: DrawContext,
  view: Viewport,
  scene: MapScene,
  robotId: string,
): void {
  const points = scene.trajectories[robotId] ?? [];
  if (points.length === 0) {
    return;
  }
  ctx.strokeStyle = robotColor(robotId, scene.robotIds);
  ctx.lineWidth = 2;
  ctx.beginPath();
  points.forEach((point, i) => {
    const { px, py } = worldToPx(view, point.x, point.y);
    if (i === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  });
  ctx.stroke();
}

export function drawDetection(
  ctx: DrawContext,
  view: Viewport,
  obj: ObjectAsset,
  robotIds: string[],
): { px: number; py: number } {
  const { px, py } = worldToPx(view, obj.x, obj.y);
  ctx.fillStyle = detectionColor(obj.robot_id, robotIds);
  ctx.beginPath();
  ctx.arc(px, py, DETECTION_RADIUS_PX, 0, 2 * Math.PI);
  ctx.fill();
  ctx.font = '10px sans-serif';
  ctx.fillText(obj.label, px + DETECTION_RADIUS_PX + 2, py + 3);
  return { px, py };
}

function drawPose(ctx: DrawContext, view: Viewport, pose: PoseEvent, scene: MapScene): void {
  const { px, py } = worldToPx(view, pose.x, pose.y);
  let color = robotColor(pose.robot_id, scene.robotIds);
  if (scene.aerialRobots.has(pose.robot_id)) {
    color = altitudeTint(color, pose.z);
  }
  ctx.fillStyle = color;
  const size = 8;
  const yaw = -pose.yaw; // canvas y is flipped
  ctx.beginPath();
  ctx.moveTo(px + size * Math.cos(yaw), py + size * Math.sin(yaw));
  ctx.lineTo(px + size * Math.cos(yaw + 2.5), py + size * Math.sin(yaw + 2.5));
  ctx.lineTo(px + size * Math.cos(yaw - 2.5), py + size * Math.sin(yaw - 2.5));
  ctx.closePath();
  ctx.fill();
  ctx.font = '11px sans-serif';
  ctx.fillText(pose.robot_id, px + 10, py - 8);
}

function drawDraftWaypoints(
  ctx: DrawContext,
  view: Viewport,
  waypoints: [number, number, number][],
): void {
  if (waypoints.length === 0) {
    return;
  }
  ctx.strokeStyle = '#cc3333';
  ctx.fillStyle = '#cc3333';
  ctx.lineWidth = 1;
  ctx.globalAlpha = 0.9;
  ctx.beginPath();
  waypoints.forEach(([x, y], i) => {
    const { px, py } = worldToPx(view, x, y);
    if (i === 0) {
      ctx.moveTo(px, py);
    } else {
      ctx.lineTo(px, py);
    }
  });
  ctx.stroke();
  for (const [x, y] of waypoints) {
    const { px, py } = worldToPx(view, x, y);
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.stroke();
  }
  ctx.globalAlpha = 1.0;
}
