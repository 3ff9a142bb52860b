var a = [1, 2, 3];
a.push(4);
/* join them */
var s = a.join("-");
print(s.length, s.charAt(1), a[2]);
